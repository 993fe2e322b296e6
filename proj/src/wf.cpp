#include "ivl/wf.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace ivl {

namespace {

Diagnostic diag(const std::string& rule, Span sp, const std::string& msg) {
    return Diagnostic{Severity::Error, rule, sp, msg};
}

bool resolve_type(const Program& p, const TypeRef& t) {
    if (t.elem) return resolve_type(p, *t.elem);
    if (is_scalar_class(t.cls)) return true;
    return p.find_class(t.cls) != nullptr;
}

// Counts occurrences of the variable `this`.
int count_this(const ExprPtr& e) {
    if (e->kind == Ek::Var) return e->name == "this" ? 1 : 0;
    int n = 0;
    for (const auto& k : e->kids) n += count_this(k);
    return n;
}

constexpr int kHelperInlineDepth = 32;

// Relaxation: invariants may call instance methods that in turn only use
// this to read imm/capsule fields or call other such methods. Inlined
// conceptually to a bounded depth; recursion through this-helpers rejected.
struct InvariantWalker {
    const Program& p;
    const ClassDecl& cls;
    std::vector<Diagnostic>& out;
    std::set<std::string> visiting;

    void check_body(const ExprPtr& body, Span at, int depth) {
        if (depth > kHelperInlineDepth) {
            out.push_back(diag("inv-helper-recursion", at,
                               "helper chain from invariant exceeds inline "
                               "depth " + std::to_string(kHelperInlineDepth)));
            return;
        }
        walk(body, nullptr, 0, depth);
    }

    void walk(const ExprPtr& e, const Expr* parent, size_t pos, int depth) {
        if (e->kind == Ek::Var && e->name == "this") {
            if (parent != nullptr && parent->kind == Ek::FieldAcc && pos == 0) {
                const FieldDecl* fd = cls.find_field(parent->name);
                if (!fd || (fd->type.mdf != Mdf::Imm &&
                            fd->type.mdf != Mdf::Capsule)) {
                    out.push_back(diag(
                        "inv-this-misuse", parent->span,
                        "invariant of " + cls.name + " uses this to access " +
                            parent->name +
                            ", which is not an imm or capsule field"));
                }
                return;
            }
            if (parent != nullptr && parent->kind == Ek::MCall && pos == 0) {
                check_helper(parent->name, parent->span, depth + 1);
                return;
            }
            out.push_back(diag("inv-this-misuse",
                               parent ? parent->span : e->span,
                               "invariant of " + cls.name +
                                   " may use this only to read imm/capsule "
                                   "fields or call inlinable helpers"));
            return;
        }
        for (size_t i = 0; i < e->kids.size(); ++i)
            walk(e->kids[i], e.get(), i, depth);
    }

    void check_helper(const std::string& m, Span at, int depth) {
        const MethodDecl* md = cls.find_method(m);
        if (!md || !md->body) {
            out.push_back(diag("inv-this-misuse", at,
                               "invariant helper " + m + " not found in " +
                                   cls.name));
            return;
        }
        if (visiting.count(m)) {
            out.push_back(diag("inv-helper-recursion", at,
                               "invariant helper " + m +
                                   " recurses through this"));
            return;
        }
        visiting.insert(m);
        check_body(md->body, at, depth);
        visiting.erase(m);
    }
};

}  // namespace

std::vector<Diagnostic> check_invariant_method(const Program& p,
                                               const ClassDecl& c) {
    std::vector<Diagnostic> out;
    if (c.kind == ClassKind::Interface) return out;
    const MethodDecl* inv = c.find_method("invariant");
    if (!inv) return out;  // parser synthesizes; hand-built tables may omit
    if (inv->synthesized) return out;
    if (inv->receiver != Mdf::Read)
        out.push_back(diag("inv-receiver-not-read", inv->span,
                           c.name + ".invariant must take a read receiver"));
    if (!inv->params.empty())
        out.push_back(diag("inv-has-params", inv->span,
                           c.name + ".invariant must take no parameters"));
    if (inv->ret.elem || inv->ret.cls != "Bool" || inv->ret.mdf != Mdf::Imm)
        out.push_back(diag("inv-return-not-bool", inv->span,
                           c.name + ".invariant must return imm Bool"));
    if (inv->body) {
        InvariantWalker w{p, c, out, {}};
        w.visiting.insert("invariant");
        w.check_body(inv->body, inv->span, 0);
    }
    return out;
}

std::vector<Diagnostic> check_capsule_mutators(const Program& p,
                                               const ClassDecl& c) {
    std::vector<Diagnostic> out;
    if (c.kind == ClassKind::Interface) return out;
    for (const auto& m : c.methods) {
        if (!is_capsule_mutator(p, c, m)) continue;
        int uses = count_this(m.body);
        if (uses != 1)
            out.push_back(diag("cm-this-once", m.span,
                               c.name + "." + m.name +
                                   " is a capsule mutator and must use this "
                                   "exactly once (found " +
                                   std::to_string(uses) + ")"));
        for (const auto& prm : m.params) {
            if (prm.type.mdf == Mdf::Mut || prm.type.mdf == Mdf::Read)
                out.push_back(
                    diag("cm-param-modifier", m.span,
                         c.name + "." + m.name + ": capsule mutator parameter " +
                             prm.name + " must be imm or capsule, not " +
                             mdf_name(prm.type.mdf)));
        }
        if (m.ret.mdf == Mdf::Mut)
            out.push_back(diag("cm-mut-return", m.span,
                               c.name + "." + m.name +
                                   ": capsule mutators must not return mut"));
        if (m.declares_throws)
            out.push_back(diag("cm-throws-nonempty", m.span,
                               c.name + "." + m.name +
                                   ": capsule mutators must have an empty "
                                   "throws clause"));
    }
    return out;
}

namespace {

bool qualifying_path(const ExprPtr& e, const std::set<std::string>& roots) {
    if (e->kind == Ek::Loc) return true;
    if (e->kind == Ek::Var) return roots.count(e->name) > 0;
    if (e->kind == Ek::FieldAcc) return qualifying_path(e->kids[0], roots);
    return false;
}

void walk_receivers(const ExprPtr& e, std::set<std::string> roots,
                    bool in_main, std::vector<Diagnostic>& out) {
    switch (e->kind) {
        case Ek::FieldAcc:
        case Ek::FieldUpd:
            if (!qualifying_path(e->kids[0], roots))
                out.push_back(diag(
                    "fields-instance-private", e->span,
                    std::string("field ") + (e->kind == Ek::FieldUpd
                                                 ? "update"
                                                 : "access") +
                        " receiver must be " +
                        (in_main ? "a location or local"
                                 : "this or a this-rooted path")));
            break;
        case Ek::Let:
            walk_receivers(e->kids[0], roots, in_main, out);
            if (in_main) roots.insert(e->name);
            walk_receivers(e->kids[1], roots, in_main, out);
            return;
        case Ek::ForEachUnit:
        case Ek::ForEachAll: {
            walk_receivers(e->kids[0], roots, in_main, out);
            if (qualifying_path(e->kids[0], roots)) roots.insert(e->name);
            walk_receivers(e->kids[1], roots, in_main, out);
            return;
        }
        default:
            break;
    }
    for (const auto& k : e->kids) walk_receivers(k, roots, in_main, out);
}

}  // namespace

std::vector<Diagnostic> check_receiver_forms(const Program& p) {
    std::vector<Diagnostic> out;
    for (const auto& [name, cd] : p.classes) {
        for (const auto& m : cd.methods) {
            if (!m.body) continue;
            std::set<std::string> roots;
            if (!m.is_static) roots.insert("this");
            walk_receivers(m.body, roots, /*in_main=*/false, out);
        }
    }
    if (p.main) {
        // main-expression locals become locations at runtime
        walk_receivers(p.main, {"cap"}, /*in_main=*/true, out);
    }
    return out;
}

namespace {

void find_new_cap(const ExprPtr& e, std::vector<Diagnostic>& out) {
    if (e->kind == Ek::New && e->name == "Cap")
        out.push_back(diag("cap-no-new", e->span,
                           "instances of Cap cannot be created"));
    for (const auto& k : e->kids) find_new_cap(k, out);
}

}  // namespace

std::vector<Diagnostic> check_cap_rules(const Program& p) {
    std::vector<Diagnostic> out;
    for (const auto& [name, cd] : p.classes)
        for (const auto& m : cd.methods)
            if (m.body) find_new_cap(m.body, out);
    if (p.main) find_new_cap(p.main, out);

    const ClassDecl* cap = p.find_class("Cap");
    if (!cap) return out;
    for (const auto& m : cap->methods) {
        if (m.name == "invariant") {
            bool trivially_true =
                m.body && m.body->kind == Ek::BoolLit && m.body->ival == 1;
            if (!trivially_true)
                out.push_back(diag("cap-invariant-not-true", m.span,
                                   "Cap.invariant must be literally true"));
            continue;
        }
        if (m.is_static || m.receiver != Mdf::Mut)
            out.push_back(diag("cap-mut-receiver", m.span,
                               "all Cap methods must take a mut receiver"));
    }
    for (const auto& f : cap->fields) {
        if (f.type.mdf != Mdf::Mut) {
            out.push_back(diag("cap-mut-fields-only", f.span,
                               "Cap can only have mut fields"));
        } else if (!f.type.elem) {
            // the initial memory must be constructible: only (empty) lists
            // have a canonical initial value
            out.push_back(diag("cap-field-uninitializable", f.span,
                               "Cap fields must be mut List types"));
        }
    }
    return out;
}

std::vector<Diagnostic> wf_check_program(const Program& p) {
    std::vector<Diagnostic> out;
    for (const auto& [name, cd] : p.classes) {
        if (is_scalar_class(name) || name == "List")
            out.push_back(diag("reserved-class-name", cd.span,
                               name + " is a built-in type name"));
        for (const auto& i : cd.implements) {
            const ClassDecl* icd = p.find_class(i);
            if (!icd)
                out.push_back(diag("unknown-interface", cd.span,
                                   cd.name + " implements unknown " + i));
            else if (icd->kind != ClassKind::Interface)
                out.push_back(diag("implements-non-interface", cd.span,
                                   cd.name + " implements non-interface " + i));
        }
        for (const auto& f : cd.fields) {
            if (!resolve_type(p, f.type))
                out.push_back(diag("unknown-class", f.span,
                                   "unknown type in field " + f.name));
            if (f.type.mdf == Mdf::Read)
                out.push_back(diag("field-modifier-read", f.span,
                                   "read fields are not supported"));
            if (f.type.elem && f.type.elem->mdf == Mdf::Read)
                out.push_back(diag("field-modifier-read", f.span,
                                   "read list elements are not supported"));
        }
        for (const auto& m : cd.methods) {
            if (!resolve_type(p, m.ret))
                out.push_back(diag("unknown-class", m.span,
                                   "unknown return type in " + m.name));
            for (const auto& prm : m.params)
                if (!resolve_type(p, prm.type))
                    out.push_back(diag("unknown-class", m.span,
                                       "unknown type for parameter " +
                                           prm.name + " in " + m.name));
        }
        auto a = check_invariant_method(p, cd);
        out.insert(out.end(), a.begin(), a.end());
        auto b = check_capsule_mutators(p, cd);
        out.insert(out.end(), b.begin(), b.end());
    }
    auto c = check_receiver_forms(p);
    out.insert(out.end(), c.begin(), c.end());
    auto d = check_cap_rules(p);
    out.insert(out.end(), d.begin(), d.end());
    std::stable_sort(out.begin(), out.end(),
                     [](const Diagnostic& x, const Diagnostic& y) {
                         if (x.span.line != y.span.line)
                             return x.span.line < y.span.line;
                         if (x.span.col != y.span.col)
                             return x.span.col < y.span.col;
                         return x.rule_id < y.rule_id;
                     });
    return out;
}

}  // namespace ivl
