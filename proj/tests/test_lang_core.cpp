#include "doctest.h"

#include "ivl/corpus.hpp"
#include "ivl/fuzz.hpp"
#include "ivl/parser.hpp"

using namespace ivl;

namespace {

Program parse_corpus(const std::string& name) {
    LoadResult lr = load_file(corpus_dir() + "/" + name);
    REQUIRE_MESSAGE(lr.parse_ok, lr.parse_error);
    return lr.parsed;
}

// independent brute-force: does the body contain this.f anywhere?
bool walk_for_this_field(const ExprPtr& e, const std::string& f) {
    if ((e->kind == Ek::FieldAcc || e->kind == Ek::FieldUpd) && e->name == f &&
        e->kids[0]->kind == Ek::Var && e->kids[0]->name == "this")
        return true;
    for (const auto& k : e->kids)
        if (walk_for_this_field(k, f)) return true;
    return false;
}

}  // namespace

TEST_CASE("parsing the person class yields the expected shape") {
    Program p = parse_corpus("person.ivl");
    // one user class (plus the synthesized Cap)
    CHECK(p.classes.size() == 2);
    const ClassDecl* person = p.find_class("Person");
    REQUIRE(person != nullptr);
    CHECK(person->fields.size() == 3);
    CHECK(person->has_explicit_ctor);
    CHECK(person->find_method("invariant") != nullptr);
    CHECK_FALSE(person->find_method("invariant")->synthesized);
    CHECK(person->find_method("name") != nullptr);
    CHECK(person->find_method("setName") != nullptr);
}

TEST_CASE("omitted invariants are synthesized and return true") {
    Program p = parse_program("class A { } main { true; }");
    const ClassDecl* a = p.find_class("A");
    REQUIRE(a != nullptr);
    const MethodDecl* inv = a->find_method("invariant");
    REQUIRE(inv != nullptr);
    CHECK(inv->synthesized);
    CHECK(inv->receiver == Mdf::Read);
    REQUIRE(inv->body != nullptr);
    CHECK(inv->body->kind == Ek::BoolLit);
    CHECK(inv->body->ival == 1);
}

TEST_CASE("every class in every parsed program has one invariant entry") {
    for (const char* f : {"person.ivl", "cage.ivl", "family.ivl", "gui.ivl",
                          "shipping.ivl"}) {
        Program p = parse_corpus(f);
        for (const auto& [name, cd] : p.classes) {
            if (cd.kind == ClassKind::Interface) continue;
            int n = 0;
            for (const auto& m : cd.methods)
                if (m.name == "invariant") ++n;
            CHECK_MESSAGE(n == 1, name, " in ", f);
        }
    }
}

TEST_CASE("non-standard constructors are rejected") {
    CHECK_THROWS_AS(
        parse_program("class B { B(Int x){ this.y := x; } Int y; } main {0;}"),
        ParseError);
    try {
        parse_program("class B { B(Int x){ this.y := x; } Int y; } main {0;}");
    } catch (const ParseError& e) {
        CHECK(e.pkind == ParseError::StandardForm);
    }
    // parameter order must match field order
    CHECK_THROWS_AS(parse_program("class B { Int a; Int b; "
                                  "B(Int b, Int a){ this.b := b; this.a := a; } "
                                  "} main {0;}"),
                    ParseError);
}

TEST_CASE("lookup_method resolves declared and synthesized methods") {
    Program cage = parse_corpus("cage.ivl");
    const MethodDecl* move_to = lookup_method(cage, "Cage", "moveTo");
    REQUIRE(move_to != nullptr);
    CHECK(move_to->receiver == Mdf::Mut);
    REQUIRE(move_to->params.size() == 1);
    CHECK(move_to->params[0].type.mdf == Mdf::Imm);
    CHECK(move_to->params[0].type.cls == "Point");

    Program p = parse_program("class A { } main { true; }");
    const MethodDecl* inv = lookup_method(p, "A", "invariant");
    REQUIRE(inv != nullptr);
    CHECK(inv->synthesized);

    CHECK(lookup_method(cage, "Cage", "nope") == nullptr);
}

TEST_CASE("interface methods are inherited by lookup") {
    Program gui = parse_corpus("gui.ivl");
    const MethodDecl* md = lookup_method(gui, "Widget", "left");
    REQUIRE(md != nullptr);
    CHECK(md->body == nullptr);
}

TEST_CASE("field_inside_method matches the paper examples") {
    Program cage = parse_corpus("cage.ivl");
    CHECK(field_inside_method(cage, "Cage", "moveTo", "h"));
    CHECK_FALSE(field_inside_method(cage, "Cage", "moveTo", "path"));
    CHECK_FALSE(field_inside_method(cage, "Cage", "move", "h"));
    Program person = parse_corpus("person.ivl");
    CHECK(field_inside_method(person, "Person", "invariant", "name"));
}

TEST_CASE("field_inside_method agrees with a brute-force AST walk") {
    auto cases = fuzz_programs(11, 8, 10);
    for (const auto& fc : cases) {
        Program p = parse_program(fc.source);
        for (const auto& [cls, cd] : p.classes) {
            for (const auto& m : cd.methods) {
                if (!m.body) continue;
                for (const auto& f : cd.fields) {
                    CHECK(field_inside_method(p, cls, m.name, f.name) ==
                          walk_for_this_field(m.body, f.name));
                }
            }
        }
    }
}

TEST_CASE("pretty-print round-trips the corpus") {
    for (const char* f :
         {"empty.ivl", "person.ivl", "person_update_fail.ivl", "cage.ivl",
          "shipping.ivl", "family.ivl", "gui.ivl"}) {
        Program p = parse_corpus(f);
        std::string once = pretty_program(p);
        Program p2 = parse_program(once);
        std::string twice = pretty_program(p2);
        CHECK_MESSAGE(once == twice, "pretty not idempotent for ", f);
        // and the reparsed program behaves identically at the table level
        CHECK(p.classes.size() == p2.classes.size());
        for (const auto& [name, cd] : p.classes) {
            const ClassDecl* cd2 = p2.find_class(name);
            REQUIRE_MESSAGE(cd2 != nullptr, name, " lost in round-trip of ", f);
            CHECK(cd.fields.size() == cd2->fields.size());
            CHECK(cd.methods.size() == cd2->methods.size());
        }
    }
}

TEST_CASE("pretty-print round-trips fuzzed programs") {
    for (const auto& fc : fuzz_programs(3, 6, 12)) {
        Program p = parse_program(fc.source);
        std::string once = pretty_program(p);
        std::string twice = pretty_program(parse_program(once));
        CHECK(once == twice);
    }
}

TEST_CASE("substitution binds and shadows correctly") {
    // this.f with this = l
    auto acc = make_expr(Ek::FieldAcc);
    acc->name = "f";
    acc->kids = {expr_var("this")};
    ExprPtr out = substitute(acc, {{"this", expr_loc(3)}});
    CHECK(out->kind == Ek::FieldAcc);
    CHECK(out->kids[0]->kind == Ek::Loc);
    CHECK(out->kids[0]->ival == 3);

    // closed expressions are untouched (pointer equality: no copy)
    ExprPtr closed = expr_int(7);
    CHECK(substitute(closed, {{"x", expr_loc(1)}}) == closed);

    // let shadows its bound variable
    auto let = make_expr(Ek::Let);
    let->name = "x";
    let->kids = {expr_var("x"), expr_var("x")};
    ExprPtr sub = substitute(let, {{"x", expr_int(5)}});
    CHECK(sub->kids[0]->kind == Ek::IntLit);   // init sees the outer x
    CHECK(sub->kids[1]->kind == Ek::Var);      // body sees the binder
}
