#include "doctest.h"

#include "ivl/corpus.hpp"
#include "ivl/fuzz.hpp"
#include "ivl/parser.hpp"
#include "ivl/wf.hpp"

using namespace ivl;

namespace {

Program parsed(const std::string& src) { return parse_program(src); }

Program parse_corpus(const std::string& name) {
    LoadResult lr = load_file(corpus_dir() + "/" + name);
    REQUIRE_MESSAGE(lr.parse_ok, lr.parse_error);
    return lr.parsed;
}

// brute-force recomputation of the capsule-mutator side condition
bool brute_is_cm(const Program& p, const ClassDecl& c, const MethodDecl& m) {
    if (m.is_static || !m.body || m.receiver != Mdf::Mut) return false;
    const MethodDecl* inv = c.find_method("invariant");
    if (!inv || !inv->body) return false;
    for (const auto& f : c.fields) {
        if (f.type.mdf != Mdf::Capsule) continue;
        bool in_m = field_inside_method(p, c.name, m.name, f.name);
        bool in_inv = field_inside_method(p, c.name, "invariant", f.name);
        if (in_m && in_inv) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("accepted corpus carries no wf diagnostics") {
    for (const char* f : {"empty.ivl", "person.ivl", "cage.ivl",
                          "shipping.ivl", "family.ivl", "gui.ivl"}) {
        Program p = parse_corpus(f);
        auto ds = wf_check_program(p);
        CHECK_MESSAGE(!has_errors(ds), f, ": ",
                      ds.empty() ? "" : render_diagnostic(ds[0], f));
    }
}

TEST_CASE("invariant restrictions") {
    Program cage = parse_corpus("cage.ivl");
    CHECK(check_invariant_method(cage, *cage.find_class("Cage")).empty());

    // trivial invariant: fine
    Program triv = parsed("class A { read method Bool invariant() { return true; } } main {0;}");
    CHECK(check_invariant_method(triv, *triv.find_class("A")).empty());

    // helper that only reads fields through this: fine (gui inside())
    Program gui = parse_corpus("gui.ivl");
    CHECK(check_invariant_method(gui, *gui.find_class("SafeMovable")).empty());

    // wrong receiver
    Program bad1 = parsed(
        "class A { Int x; A(Int x){this.x := x;} mut method Bool invariant() { return true; } } main {0;}");
    CHECK(has_rule(check_invariant_method(bad1, *bad1.find_class("A")),
                   "inv-receiver-not-read"));

    // this used to reach a mut field
    Program bad2 = parsed(
        "class B { Int k; B(Int k){this.k := k;} } "
        "class A { mut B b; A(mut B b){this.b := b;} "
        "read method Bool invariant() { return this.b.k >= 0; } } main {0;}");
    CHECK(has_rule(check_invariant_method(bad2, *bad2.find_class("A")),
                   "inv-this-misuse"));

    // recursion through a this-helper
    Program rec = parsed(
        "class A { Int x; A(Int x){this.x := x;} "
        "read method Bool invariant() { return this.h(); } "
        "read method Bool h() { return this.h(); } } main {0;}");
    CHECK(has_rule(check_invariant_method(rec, *rec.find_class("A")),
                   "inv-helper-recursion"));
}

TEST_CASE("capsule mutator restrictions fire the expected rules") {
    Program cage = parse_corpus("cage.ivl");
    CHECK(check_capsule_mutators(cage, *cage.find_class("Cage")).empty());
    CHECK(is_capsule_mutator(cage, *cage.find_class("Cage"),
                             *cage.find_class("Cage")->find_method("moveTo")));
    CHECK_FALSE(is_capsule_mutator(cage, *cage.find_class("Cage"),
                                   *cage.find_class("Cage")->find_method("move")));

    Program expose = parse_corpus("shipping_expose.ivl");
    CHECK(has_rule(check_capsule_mutators(expose,
                                          *expose.find_class("ShippingList")),
                   "cm-mut-return"));
    Program multi = parse_corpus("shipping_multi_this.ivl");
    CHECK(has_rule(check_capsule_mutators(multi,
                                          *multi.find_class("ShippingList")),
                   "cm-this-once"));
    Program heavy = parse_corpus("shipping_add_heavy.ivl");
    CHECK(has_rule(check_capsule_mutators(heavy,
                                          *heavy.find_class("ShippingList")),
                   "cm-param-modifier"));

    Program throws = parsed(
        "class B { Int k; B(Int k){this.k := k;} mut method Void set(Int k){ this.k := k; } } "
        "class A { capsule B b; A(capsule B b){this.b := b;} "
        "read method Bool invariant() { return this.b.k >= 0; } "
        "mut method Void go(Int k) throws { this.b.set(k); } } main {0;}");
    CHECK(has_rule(check_capsule_mutators(throws, *throws.find_class("A")),
                   "cm-throws-nonempty"));
}

TEST_CASE("capsule-mutator classification agrees with brute force") {
    auto cases = fuzz_programs(23, 10, 10);
    for (const auto& fc : cases) {
        Program p = parse_program(fc.source);
        for (const auto& [name, cd] : p.classes)
            for (const auto& m : cd.methods)
                if (m.body)
                    CHECK(is_capsule_mutator(p, cd, m) == brute_is_cm(p, cd, m));
    }
    Program cage = parse_corpus("cage.ivl");
    for (const auto& [name, cd] : cage.classes)
        for (const auto& m : cd.methods)
            if (m.body)
                CHECK(is_capsule_mutator(cage, cd, m) == brute_is_cm(cage, cd, m));
}

TEST_CASE("receiver forms: fields are instance private") {
    Program bad = parsed(
        "class B { Int k; B(Int k){this.k := k;} } "
        "class A { Int x; A(Int x){this.x := x;} "
        "mut method Void poke(mut B b) { b.k := 1; } } main {0;}");
    CHECK(has_rule(check_receiver_forms(bad), "fields-instance-private"));

    // paths rooted at this and loop variables over such paths are fine
    Program fam = parse_corpus("family.ivl");
    CHECK(check_receiver_forms(fam).empty());

    // main-expression locals become locations: allowed
    Program ok = parsed(
        "class A { Int x; A(Int x){this.x := x;} } "
        "main { mut A a = new A(1); a.x; }");
    CHECK(check_receiver_forms(ok).empty());
}

TEST_CASE("Cap rules") {
    Program bad_new = parsed("main { new Cap(); }");
    CHECK(has_rule(check_cap_rules(bad_new), "cap-no-new"));

    Program bad_recv = parsed(
        "capability class Cap { mut List<Int> q; "
        "read method Int peek() { return this.q.size(); } } main {0;}");
    CHECK(has_rule(check_cap_rules(bad_recv), "cap-mut-receiver"));

    Program bad_field = parsed(
        "class B { Int k; B(Int k){this.k := k;} } "
        "capability class Cap { imm B b; } main {0;}");
    CHECK(has_rule(check_cap_rules(bad_field), "cap-mut-fields-only"));

    Program gui = parse_corpus("gui.ivl");
    CHECK(check_cap_rules(gui).empty());
}

TEST_CASE("diagnostics are deterministic and order-stable") {
    Program multi = parse_corpus("shipping_multi_this.ivl");
    auto a = wf_check_program(multi);
    auto b = wf_check_program(multi);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].rule_id == b[i].rule_id);
        CHECK(a[i].span.line == b[i].span.line);
    }
}
