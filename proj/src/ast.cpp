#include "ivl/ast.hpp"

#include <algorithm>
#include <cassert>

namespace ivl {

const char* mdf_name(Mdf m) {
    switch (m) {
        case Mdf::Mut: return "mut";
        case Mdf::Imm: return "imm";
        case Mdf::Capsule: return "capsule";
        case Mdf::Read: return "read";
    }
    return "?";
}

std::string TypeRef::str() const {
    std::string s = mdf_name(mdf);
    s += ' ';
    if (elem) {
        s += "List<" + elem->str() + ">";
    } else {
        s += cls;
    }
    return s;
}

bool same_type(const TypeRef& a, const TypeRef& b) {
    if (a.mdf != b.mdf) return false;
    if ((a.elem == nullptr) != (b.elem == nullptr)) return false;
    if (a.elem) return same_type(*a.elem, *b.elem);
    return a.cls == b.cls;
}

bool is_scalar_class(const std::string& cls) {
    return cls == "Int" || cls == "Bool" || cls == "String" || cls == "Void";
}

const char* prim_name(PrimOp op) {
    switch (op) {
        case PrimOp::Add: return "+";
        case PrimOp::Sub: return "-";
        case PrimOp::Mul: return "*";
        case PrimOp::Div: return "/";
        case PrimOp::Mod: return "%";
        case PrimOp::Eq: return "==";
        case PrimOp::Ne: return "!=";
        case PrimOp::Lt: return "<";
        case PrimOp::Le: return "<=";
        case PrimOp::Gt: return ">";
        case PrimOp::Ge: return ">=";
        case PrimOp::Not: return "!";
        case PrimOp::Neg: return "neg";
        case PrimOp::Concat: return "concat";
        case PrimOp::IsEmpty: return "isEmpty";
        case PrimOp::RefEq: return "ref==";
        case PrimOp::RefNe: return "ref!=";
        case PrimOp::Print: return "print";
    }
    return "?";
}

std::shared_ptr<Expr> make_expr(Ek k, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->span = sp;
    return e;
}

ExprPtr expr_var(const std::string& n, Span sp) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::Var;
    e->span = sp;
    e->name = n;
    return e;
}

ExprPtr expr_loc(int64_t l) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::Loc;
    e->ival = l;
    return e;
}

ExprPtr expr_bool(bool b) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::BoolLit;
    e->ival = b ? 1 : 0;
    return e;
}

ExprPtr expr_int(int64_t v) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::IntLit;
    e->ival = v;
    return e;
}

ExprPtr expr_str(const std::string& s) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::StrLit;
    e->sval = s;
    return e;
}

ExprPtr expr_unit() {
    static ExprPtr u = make_expr(Ek::UnitLit);
    return u;
}

bool is_value(const Expr& e) {
    switch (e.kind) {
        case Ek::Loc:
        case Ek::BoolLit:
        case Ek::IntLit:
        case Ek::StrLit:
        case Ek::UnitLit:
            return true;
        default:
            return false;
    }
}

bool is_error_atom(const Expr& e) {
    if (e.kind == Ek::Error) return true;
    if (e.kind == Ek::Monitor) {
        // M(l, v, false)
        return is_value(*e.kids[0]) && e.kids[1]->kind == Ek::BoolLit &&
               e.kids[1]->ival == 0;
    }
    if (e.kind == Ek::PreCheck) {
        return e.kids[0]->kind == Ek::BoolLit && e.kids[0]->ival == 0;
    }
    return false;
}

namespace {

ExprPtr subst_rec(const ExprPtr& e,
                  const std::map<std::string, ExprPtr>& b) {
    if (b.empty()) return e;
    switch (e->kind) {
        case Ek::Var: {
            auto it = b.find(e->name);
            return it == b.end() ? e : it->second;
        }
        case Ek::Loc:
        case Ek::BoolLit:
        case Ek::IntLit:
        case Ek::StrLit:
        case Ek::UnitLit:
        case Ek::Error:
            return e;
        default:
            break;
    }
    // Binders shadow; substituted values are closed, so no capture.
    std::map<std::string, ExprPtr> inner = b;
    bool shadows = false;
    if (e->kind == Ek::Let || e->kind == Ek::ForRange ||
        e->kind == Ek::ForEachUnit || e->kind == Ek::ForEachAll) {
        shadows = inner.erase(e->name) > 0;
    }
    std::vector<ExprPtr> kids;
    kids.reserve(e->kids.size());
    bool changed = false;
    for (size_t i = 0; i < e->kids.size(); ++i) {
        // For Let only the init (kid 0) sees the outer binding of the
        // shadowed name; loops bind in the body template only.
        const std::map<std::string, ExprPtr>* env = &inner;
        if (shadows && e->kind == Ek::Let && i == 0) env = &b;
        if (e->kind == Ek::ForRange && i < 2) env = &b;
        if ((e->kind == Ek::ForEachUnit || e->kind == Ek::ForEachAll) && i == 0)
            env = &b;
        ExprPtr k = subst_rec(e->kids[i], *env);
        changed |= (k != e->kids[i]);
        kids.push_back(std::move(k));
    }
    if (!changed) return e;
    auto out = std::make_shared<Expr>(*e);
    out->kids = std::move(kids);
    return out;
}

void free_vars_rec(const ExprPtr& e, std::vector<std::string>& bound,
                   std::vector<std::string>& out) {
    switch (e->kind) {
        case Ek::Var:
            if (std::find(bound.begin(), bound.end(), e->name) == bound.end())
                out.push_back(e->name);
            return;
        case Ek::Let:
            free_vars_rec(e->kids[0], bound, out);
            bound.push_back(e->name);
            free_vars_rec(e->kids[1], bound, out);
            bound.pop_back();
            return;
        case Ek::ForRange:
            free_vars_rec(e->kids[0], bound, out);
            free_vars_rec(e->kids[1], bound, out);
            bound.push_back(e->name);
            free_vars_rec(e->kids[2], bound, out);
            bound.pop_back();
            return;
        case Ek::ForEachUnit:
        case Ek::ForEachAll:
            free_vars_rec(e->kids[0], bound, out);
            bound.push_back(e->name);
            free_vars_rec(e->kids[1], bound, out);
            bound.pop_back();
            return;
        default:
            for (const auto& k : e->kids) free_vars_rec(k, bound, out);
            return;
    }
}

}  // namespace

ExprPtr substitute(const ExprPtr& e,
                   const std::map<std::string, ExprPtr>& bindings) {
    return subst_rec(e, bindings);
}

void free_vars(const ExprPtr& e, std::vector<std::string>& out) {
    std::vector<std::string> bound;
    free_vars_rec(e, bound, out);
}

const MethodDecl* ClassDecl::find_method(const std::string& m) const {
    for (const auto& md : methods)
        if (md.name == m) return &md;
    return nullptr;
}

const FieldDecl* ClassDecl::find_field(const std::string& f) const {
    for (const auto& fd : fields)
        if (fd.name == f) return &fd;
    return nullptr;
}

int ClassDecl::field_index(const std::string& f) const {
    for (size_t i = 0; i < fields.size(); ++i)
        if (fields[i].name == f) return static_cast<int>(i);
    return -1;
}

bool ClassDecl::has_declared_invariant() const {
    const MethodDecl* inv = find_method("invariant");
    return inv != nullptr && !inv->synthesized;
}

const ClassDecl* Program::find_class(const std::string& c) const {
    auto it = classes.find(c);
    return it == classes.end() ? nullptr : &it->second;
}

bool Program::is_interface(const std::string& c) const {
    const ClassDecl* cd = find_class(c);
    return cd != nullptr && cd->kind == ClassKind::Interface;
}

bool Program::implements(const std::string& cls,
                         const std::string& iface) const {
    if (cls == iface) return true;
    const ClassDecl* cd = find_class(cls);
    if (!cd) return false;
    for (const auto& i : cd->implements)
        if (implements(i, iface)) return true;
    return false;
}

const MethodDecl* lookup_method(const Program& p, const std::string& cls,
                                const std::string& m) {
    const ClassDecl* cd = p.find_class(cls);
    if (!cd) return nullptr;
    if (const MethodDecl* md = cd->find_method(m)) return md;
    // Interfaces inherit abstract signatures; final classes are local-only.
    if (cd->kind == ClassKind::Interface) {
        for (const auto& i : cd->implements)
            if (const MethodDecl* md = lookup_method(p, i, m)) return md;
    }
    return nullptr;
}

namespace {

bool contains_this_field(const ExprPtr& e, const std::string& f) {
    if (e->kind == Ek::FieldAcc || e->kind == Ek::FieldUpd) {
        if (e->name == f && e->kids[0]->kind == Ek::Var &&
            e->kids[0]->name == "this")
            return true;
    }
    for (const auto& k : e->kids)
        if (contains_this_field(k, f)) return true;
    return false;
}

}  // namespace

bool field_inside_method(const Program& p, const std::string& cls,
                         const std::string& m, const std::string& f) {
    const MethodDecl* md = lookup_method(p, cls, m);
    if (!md || !md->body) return false;
    return contains_this_field(md->body, f);
}

bool is_capsule_mutator(const Program& p, const ClassDecl& c,
                        const MethodDecl& m) {
    if (m.is_static || m.receiver != Mdf::Mut || !m.body) return false;
    for (const auto& fd : c.fields) {
        if (fd.type.mdf != Mdf::Capsule) continue;
        if (contains_this_field(m.body, fd.name) &&
            field_inside_method(p, c.name, "invariant", fd.name))
            return true;
    }
    return false;
}

}  // namespace ivl
