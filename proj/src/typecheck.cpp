#include "ivl/typecheck.hpp"

#include <algorithm>
#include <cassert>

namespace ivl {

namespace {

const char* kPoison = "?";
const char* kBottom = "!";

TypeRef poison() { return TypeRef{Mdf::Read, kPoison, nullptr}; }
TypeRef bottom() { return TypeRef{Mdf::Capsule, kBottom, nullptr}; }

bool is_poison(const TypeRef& t) { return !t.elem && t.cls == kPoison; }
bool is_bottom(const TypeRef& t) { return !t.elem && t.cls == kBottom; }

TypeRef list_type(Mdf m, std::shared_ptr<const TypeRef> elem) {
    TypeRef t;
    t.mdf = m;
    t.cls = "List";
    t.elem = std::const_pointer_cast<TypeRef>(elem);
    return t;
}

/// Typing result: a type plus flags for runtime-location flexibility and
/// SES masking (so failed mut demands report ses-mut-capture).
struct TR {
    TypeRef t;
    bool flex = false;
    bool masked = false;
};

struct Checker {
    const Program& p;
    std::vector<Diagnostic>* diags;  // null in runtime mode
    // runtime typing (oracle support)
    const std::vector<std::string>* sigma = nullptr;
    const std::vector<std::shared_ptr<const TypeRef>>* sigma_elems = nullptr;
    const Expr* probe = nullptr;
    bool failed = false;

    void error(const std::string& rule, Span sp, const std::string& msg) {
        failed = true;
        if (diags)
            diags->push_back(Diagnostic{Severity::Error, rule, sp, msg});
    }

    // --- modifier machinery -------------------------------------------------

    static Mdf viewpoint(Mdf recv, Mdf field) { return viewpoint_adapt(recv, field); }

    bool class_compat(const TypeRef& from, const TypeRef& to) {
        if (is_poison(from) || is_bottom(from) || is_poison(to)) return true;
        if (from.elem || to.elem) {
            if (!from.elem || !to.elem) return false;
            return same_type(*from.elem, *to.elem);
        }
        if (from.cls == to.cls) return true;
        return p.implements(from.cls, to.cls) && p.is_interface(to.cls);
    }

    // Promotion: a mut expression with no free mut variables declared
    // outside it (and no read ones, for imm/capsule targets) promotes.
    bool promotable(TypeEnv& env, const ExprPtr& e, Mdf target,
                    std::vector<std::string>* offenders) {
        std::vector<std::string> fv;
        free_vars(e, fv);
        std::sort(fv.begin(), fv.end());
        fv.erase(std::unique(fv.begin(), fv.end()), fv.end());
        bool ok = true;
        for (const auto& v : fv) {
            auto it = env.vars.find(v);
            if (it == env.vars.end()) continue;
            Mdf m = it->second.type.mdf;
            if (it->second.masked && m == Mdf::Mut) m = Mdf::Read;
            bool bad = (m == Mdf::Mut) ||
                       (m == Mdf::Read &&
                        (target == Mdf::Imm || target == Mdf::Capsule));
            if (bad) {
                ok = false;
                if (offenders) offenders->push_back(v);
            }
        }
        return ok;
    }

    // from := assignment of `expr` (typed `from`) to something of type `to`.
    bool assign(TypeEnv& env, const TR& from, const TypeRef& to,
                const ExprPtr& expr, Span sp, const char* what) {
        if (is_poison(from.t) || is_bottom(from.t)) return true;
        if (!class_compat(from.t, to)) {
            error("type-mismatch", sp,
                  std::string(what) + ": expected " + to.str() + ", found " +
                      from.t.str());
            return false;
        }
        if (from.flex) return true;
        Mdf f = from.t.mdf;
        switch (to.mdf) {
            case Mdf::Read:
                return true;
            case Mdf::Mut:
                if (f == Mdf::Mut || f == Mdf::Capsule) return true;
                if (f == Mdf::Read) {
                    error(from.masked ? "ses-mut-capture" : "read-to-mut", sp,
                          std::string(what) +
                              (from.masked
                                   ? ": variable is masked read inside try"
                                   : ": read reference used as mut"));
                } else {
                    error("modifier-mismatch", sp,
                          std::string(what) + ": imm reference used as mut");
                }
                return false;
            case Mdf::Imm:
            case Mdf::Capsule: {
                if (f == Mdf::Capsule) return true;
                if (f == Mdf::Imm && to.mdf == Mdf::Imm) return true;
                if (f == Mdf::Mut) {
                    std::vector<std::string> offenders;
                    if (promotable(env, expr, to.mdf, &offenders)) return true;
                    std::string names;
                    for (const auto& o : offenders)
                        names += (names.empty() ? "" : ", ") + o;
                    error("modifier-mismatch", sp,
                          std::string(what) + ": mut cannot be promoted to " +
                              mdf_name(to.mdf) +
                              "; free mut/read variables: " + names);
                    return false;
                }
                error("modifier-mismatch", sp,
                      std::string(what) + ": " + std::string(mdf_name(f)) +
                          " reference used as " + mdf_name(to.mdf));
                return false;
            }
        }
        return false;
    }

    bool require_mut_receiver(const TR& recv, Span sp, const char* what) {
        if (recv.flex || is_poison(recv.t) || is_bottom(recv.t)) return true;
        if (recv.t.mdf == Mdf::Mut || recv.t.mdf == Mdf::Capsule) return true;
        if (recv.t.mdf == Mdf::Read) {
            error(recv.masked ? "ses-mut-capture" : "mut-through-read", sp,
                  std::string(what) +
                      (recv.masked ? " on a variable masked read inside try"
                                   : " requires a mut receiver"));
        } else {
            error("modifier-mismatch", sp,
                  std::string(what) + " requires a mut receiver, found imm");
        }
        return false;
    }

    TypeRef join(const TypeRef& a, const TypeRef& b, Span sp) {
        if (is_bottom(a) || is_poison(a)) return b;
        if (is_bottom(b) || is_poison(b)) return a;
        TypeRef r;
        if (a.elem || b.elem) {
            if (!a.elem || !b.elem || !same_type(*a.elem, *b.elem)) {
                error("type-mismatch", sp, "branch types do not agree");
                return poison();
            }
            r = a;
        } else if (a.cls == b.cls) {
            r = a;
        } else if (p.is_interface(b.cls) && p.implements(a.cls, b.cls)) {
            r = b;
        } else if (p.is_interface(a.cls) && p.implements(b.cls, a.cls)) {
            r = a;
        } else {
            error("type-mismatch", sp,
                  "branch types do not agree: " + a.str() + " vs " + b.str());
            return poison();
        }
        Mdf x = a.mdf, y = b.mdf;
        if (x == y) {
            r.mdf = x;
        } else if (x == Mdf::Capsule) {
            r.mdf = y;
        } else if (y == Mdf::Capsule) {
            r.mdf = x;
        } else {
            r.mdf = Mdf::Read;
        }
        return r;
    }

    // --- expression checking ------------------------------------------------

    struct Out {
        TR tr;
        ExprPtr e;
    };

    Out check(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        return check_expect(env, ctx, e, nullptr);
    }

    Out check_expect(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e0,
                     const TypeRef* expected) {
        ExprPtr e = e0;
        // List.of without explicit instantiation takes its element type
        // from the expected type when available.
        if (e->kind == Ek::SCall && !e->tref && expected && expected->elem &&
            (e->name == "List" || e->name.rfind("List<", 0) == 0) &&
            e->name2 == "of") {
            auto n = std::make_shared<Expr>(*e);
            n->tref = expected->elem;
            e = n;
        }
        switch (e->kind) {
            case Ek::Var: return check_var(env, ctx, e);
            case Ek::Loc: return check_loc(e);
            case Ek::BoolLit: return {{TypeRef{Mdf::Imm, "Bool", nullptr}}, e};
            case Ek::IntLit: return {{TypeRef{Mdf::Imm, "Int", nullptr}}, e};
            case Ek::StrLit: return {{TypeRef{Mdf::Imm, "String", nullptr}}, e};
            case Ek::UnitLit: return {{TypeRef{Mdf::Imm, "Void", nullptr}}, e};
            case Ek::FieldAcc: return check_field_acc(env, ctx, e);
            case Ek::FieldUpd: return check_field_upd(env, ctx, e);
            case Ek::MCall: return check_mcall(env, ctx, e);
            case Ek::SCall: return check_scall(env, ctx, e);
            case Ek::New: return check_new(env, ctx, e);
            case Ek::Try:
            case Ek::TryAnn: return check_try(env, ctx, e);
            case Ek::Throw: return check_throw(env, ctx, e);
            case Ek::If: return check_if(env, ctx, e);
            case Ek::And:
            case Ek::Or: return check_andor(env, ctx, e);
            case Ek::Prim: return check_prim(env, ctx, e);
            case Ek::Let: return check_let(env, ctx, e);
            case Ek::Seq: return check_seq(env, ctx, e);
            case Ek::ForRange: return check_for_range(env, ctx, e);
            case Ek::ForEachUnit:
            case Ek::ForEachAll: return check_foreach(env, ctx, e);
            case Ek::Monitor: return check_monitor(env, ctx, e);
            case Ek::PreCheck: return check_precheck(env, ctx, e);
            case Ek::Error: return {{bottom()}, e};
        }
        error("type-mismatch", e->span, "unexpected expression form");
        return {{poison()}, e};
    }

    Out check_var(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        if (e->name == "this") {
            if (ctx.enclosing_class.empty() || ctx.is_static) {
                error("unknown-name", e->span, "this is not in scope");
                return {{poison()}, e};
            }
            return {{TypeRef{ctx.receiver, ctx.enclosing_class, nullptr}}, e};
        }
        auto it = env.vars.find(e->name);
        if (it == env.vars.end()) {
            error("unknown-name", e->span, "unknown name " + e->name);
            return {{poison()}, e};
        }
        VarBinding& b = it->second;
        if (b.type.mdf == Mdf::Capsule) {
            if (b.consumed) {
                error("capsule-reuse", e->span,
                      "capsule local " + e->name + " is affine and was "
                      "already consumed");
                return {{poison()}, e};
            }
            b.consumed = true;
        }
        TR tr{b.type};
        if (b.masked && b.type.mdf == Mdf::Mut) {
            tr.t.mdf = Mdf::Read;
            tr.masked = true;
        }
        return {tr, e};
    }

    Out check_loc(const ExprPtr& e) {
        if (!sigma || static_cast<size_t>(e->ival) >= sigma->size()) {
            error("unknown-name", e->span, "location outside sigma");
            return {{poison()}, e};
        }
        size_t l = static_cast<size_t>(e->ival);
        TypeRef t;
        t.cls = (*sigma)[l];
        if (sigma_elems && (*sigma_elems)[l]) {
            t.cls = "List";
            t.elem = std::const_pointer_cast<TypeRef>((*sigma_elems)[l]);
        }
        if (probe == e.get()) {
            t.mdf = Mdf::Imm;
            return {{t, /*flex=*/false}, e};
        }
        t.mdf = Mdf::Mut;
        return {{t, /*flex=*/true}, e};
    }

    Out check_field_acc(TypeEnv& env, const MethodContext& ctx,
                        const ExprPtr& e) {
        Out recv = check(env, ctx, e->kids[0]);
        TR rt = recv.tr;
        if (is_poison(rt.t) || is_bottom(rt.t)) return {{poison()}, e};
        if (rt.t.elem || is_scalar_class(rt.t.cls)) {
            error("type-mismatch", e->span,
                  "value of type " + rt.t.str() + " has no fields");
            return {{poison()}, e};
        }
        const ClassDecl* cd = p.find_class(rt.t.cls);
        if (!cd) {
            error("unknown-class", e->span, "unknown class " + rt.t.cls);
            return {{poison()}, e};
        }
        if (cd->kind == ClassKind::Interface) {
            error("type-mismatch", e->span, "interfaces have no fields");
            return {{poison()}, e};
        }
        const FieldDecl* fd = cd->find_field(e->name);
        if (!fd) {
            error("unknown-name", e->span,
                  rt.t.cls + " has no field " + e->name);
            return {{poison()}, e};
        }
        TypeRef result = fd->type;
        bool this_recv = e->kids[0]->kind == Ek::Var &&
                         e->kids[0]->name == "this";
        if (this_recv && ctx.in_capsule_mutator &&
            fd->type.mdf == Mdf::Capsule) {
            // the mut view of the capsule field; single-this makes it affine
            result.mdf = Mdf::Mut;
        } else {
            Mdf eff = rt.flex ? Mdf::Mut : rt.t.mdf;
            if (probe && rt.flex) eff = Mdf::Mut;
            result.mdf = viewpoint(eff, fd->type.mdf);
            if (!rt.flex && rt.t.mdf == Mdf::Imm) result.mdf = Mdf::Imm;
        }
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = recv.e;
        return {{result, false, rt.masked}, out};
    }

    Out check_field_upd(TypeEnv& env, const MethodContext& ctx,
                        const ExprPtr& e) {
        Out recv = check(env, ctx, e->kids[0]);
        TR rt = recv.tr;
        TypeRef field_ty = poison();
        if (!is_poison(rt.t) && !is_bottom(rt.t)) {
            if (rt.t.elem || is_scalar_class(rt.t.cls)) {
                error("type-mismatch", e->span, "no such field");
            } else if (const ClassDecl* cd = p.find_class(rt.t.cls)) {
                if (const FieldDecl* fd = cd->find_field(e->name)) {
                    field_ty = fd->type;
                } else {
                    error("unknown-name", e->span,
                          rt.t.cls + " has no field " + e->name);
                }
            }
            require_mut_receiver(rt, e->span, "field update");
        }
        Out val = check_expect(env, ctx, e->kids[1], &field_ty);
        if (!is_poison(field_ty))
            assign(env, val.tr, field_ty, e->kids[1], e->span, "field update");
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = recv.e;
        out->kids[1] = val.e;
        return {rt, out};
    }

    // Built-in String methods lower to prims.
    Out scalar_mcall(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e,
                     const Out& recv) {
        const std::string& cls = recv.tr.t.cls;
        if (cls == "String" && e->name == "concat" && e->kids.size() == 2) {
            Out arg = check(env, ctx, e->kids[1]);
            if (!is_poison(arg.tr.t) && arg.tr.t.cls != "String")
                error("type-mismatch", e->span, "concat expects a String");
            auto m = std::make_shared<Expr>();
            m->kind = Ek::Prim;
            m->span = e->span;
            m->prim = PrimOp::Concat;
            m->kids = {recv.e, arg.e};
            return {{TypeRef{Mdf::Imm, "String", nullptr}}, m};
        }
        if (cls == "String" && e->name == "isEmpty" && e->kids.size() == 1) {
            auto m = std::make_shared<Expr>();
            m->kind = Ek::Prim;
            m->span = e->span;
            m->prim = PrimOp::IsEmpty;
            m->kids = {recv.e};
            return {{TypeRef{Mdf::Imm, "Bool", nullptr}}, m};
        }
        error("unknown-method", e->span,
              cls + " has no method " + e->name);
        return {{poison()}, e};
    }

    Out list_mcall(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e,
                   const Out& recv) {
        const TypeRef& lt = recv.tr.t;
        const TypeRef& elem = *lt.elem;
        size_t nargs = e->kids.size() - 1;
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = recv.e;
        if (e->name == "add" && nargs == 1) {
            require_mut_receiver(recv.tr, e->span, "List.add");
            Out a = check_expect(env, ctx, e->kids[1], &elem);
            assign(env, a.tr, elem, e->kids[1], e->span, "List.add");
            out->kids[1] = a.e;
            return {{TypeRef{Mdf::Imm, "Void", nullptr}}, out};
        }
        if (e->name == "get" && nargs == 1) {
            Out a = check(env, ctx, e->kids[1]);
            if (!is_poison(a.tr.t) && a.tr.t.cls != "Int")
                error("type-mismatch", e->span, "List.get expects an Int");
            out->kids[1] = a.e;
            TypeRef r = elem;
            Mdf eff = recv.tr.flex ? Mdf::Mut : lt.mdf;
            r.mdf = viewpoint(eff, elem.mdf);
            if (!recv.tr.flex && lt.mdf == Mdf::Imm) r.mdf = Mdf::Imm;
            return {{r, false, recv.tr.masked}, out};
        }
        if (e->name == "size" && nargs == 0)
            return {{TypeRef{Mdf::Imm, "Int", nullptr}}, out};
        if ((e->name == "indexOf" || e->name == "contains") && nargs == 1) {
            TypeRef want = elem;
            want.mdf = Mdf::Read;
            Out a = check_expect(env, ctx, e->kids[1], &want);
            assign(env, a.tr, want, e->kids[1], e->span, e->name.c_str());
            out->kids[1] = a.e;
            return {{TypeRef{Mdf::Imm, e->name == "indexOf" ? "Int" : "Bool",
                             nullptr}},
                    out};
        }
        error("unknown-method", e->span, "List has no method " + e->name +
                                             "/" + std::to_string(nargs));
        return {{poison()}, e};
    }

    Out check_mcall(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        Out recv = check(env, ctx, e->kids[0]);
        if (is_poison(recv.tr.t) || is_bottom(recv.tr.t)) {
            for (size_t i = 1; i < e->kids.size(); ++i) check(env, ctx, e->kids[i]);
            return {{poison()}, e};
        }
        if (!recv.tr.t.elem && is_scalar_class(recv.tr.t.cls))
            return scalar_mcall(env, ctx, e, recv);
        if (recv.tr.t.elem) return list_mcall(env, ctx, e, recv);
        if (recv.tr.t.cls == "Cap" && e->name == "print" &&
            e->kids.size() == 2) {
            require_mut_receiver(recv.tr, e->span, "print");
            Out a = check(env, ctx, e->kids[1]);
            if (!is_poison(a.tr.t) &&
                (a.tr.t.elem || !is_scalar_class(a.tr.t.cls) ||
                 a.tr.t.cls == "Void"))
                error("type-mismatch", e->span,
                      "print expects an Int, Bool or String");
            auto m = std::make_shared<Expr>();
            m->kind = Ek::Prim;
            m->span = e->span;
            m->prim = PrimOp::Print;
            m->kids = {recv.e, a.e};
            return {{TypeRef{Mdf::Imm, "Void", nullptr}}, m};
        }
        const MethodDecl* md = lookup_method(p, recv.tr.t.cls, e->name);
        if (!md || md->is_static) {
            error("unknown-method", e->span,
                  recv.tr.t.cls + " has no method " + e->name);
            return {{poison()}, e};
        }
        if (!recv.tr.flex) {
            switch (md->receiver) {
                case Mdf::Mut:
                    require_mut_receiver(recv.tr, e->span,
                                         ("call to mut method " + e->name).c_str());
                    break;
                case Mdf::Imm:
                    if (recv.tr.t.mdf != Mdf::Imm &&
                        recv.tr.t.mdf != Mdf::Capsule)
                        error("modifier-mismatch", e->span,
                              e->name + " requires an imm receiver");
                    break;
                case Mdf::Capsule:
                    if (recv.tr.t.mdf != Mdf::Capsule)
                        error("modifier-mismatch", e->span,
                              e->name + " requires a capsule receiver");
                    break;
                case Mdf::Read:
                    break;
            }
        }
        if (md->is_capability && !ctx.is_capability_context)
            error("capability-call-outside", e->span,
                  "capability method " + e->name +
                      " called outside a capability context");
        if (e->kids.size() - 1 != md->params.size()) {
            error("arity-mismatch", e->span,
                  e->name + " expects " + std::to_string(md->params.size()) +
                      " arguments");
            return {{md->ret}, e};
        }
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = recv.e;
        for (size_t i = 0; i < md->params.size(); ++i) {
            Out a = check_expect(env, ctx, e->kids[i + 1],
                                 &md->params[i].type);
            assign(env, a.tr, md->params[i].type, e->kids[i + 1], e->span,
                   ("argument " + md->params[i].name).c_str());
            out->kids[i + 1] = a.e;
        }
        return {{md->ret}, out};
    }

    Out check_scall(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        bool is_list = e->name == "List" || e->name.rfind("List<", 0) == 0;
        if (is_list) {
            if (e->name2 != "of") {
                error("unknown-method", e->span,
                      "List has no static method " + e->name2);
                return {{poison()}, e};
            }
            std::shared_ptr<const TypeRef> elem = e->tref;
            auto out = std::make_shared<Expr>(*e);
            std::vector<TR> args;
            for (size_t i = 0; i < e->kids.size(); ++i) {
                Out a = elem ? check_expect(env, ctx, e->kids[i], elem.get())
                             : check(env, ctx, e->kids[i]);
                args.push_back(a.tr);
                out->kids[i] = a.e;
            }
            if (!elem) {
                if (args.empty()) {
                    error("type-mismatch", e->span,
                          "cannot infer the element type of an empty List.of; "
                          "write List<T>.of() or new List<T>()");
                    return {{poison()}, e};
                }
                TypeRef et = args[0].t;
                bool all_imm = true;
                for (const auto& a : args) {
                    if (!class_compat(a.t, et)) {
                        error("type-mismatch", e->span,
                              "List.of arguments disagree on element type");
                        return {{poison()}, e};
                    }
                    if (a.t.mdf != Mdf::Imm && a.t.mdf != Mdf::Capsule)
                        all_imm = false;
                }
                et.mdf = all_imm ? Mdf::Imm : Mdf::Mut;
                elem = std::make_shared<const TypeRef>(et);
            }
            for (size_t i = 0; i < e->kids.size(); ++i)
                assign(env, args[i], *elem, e->kids[i], e->span, "List.of");
            out->tref = elem;
            out->name = "List<" + elem->str() + ">";
            return {{list_type(Mdf::Mut, elem)}, out};
        }
        const ClassDecl* cd = p.find_class(e->name);
        if (!cd) {
            error("unknown-class", e->span, "unknown class " + e->name);
            return {{poison()}, e};
        }
        const MethodDecl* md = cd->find_method(e->name2);
        if (!md || !md->is_static) {
            error("unknown-method", e->span,
                  e->name + " has no static method " + e->name2);
            return {{poison()}, e};
        }
        if (md->is_capability && !ctx.is_capability_context)
            error("capability-call-outside", e->span,
                  "capability method " + e->name2 +
                      " called outside a capability context");
        if (e->kids.size() != md->params.size()) {
            error("arity-mismatch", e->span,
                  e->name2 + " expects " + std::to_string(md->params.size()) +
                      " arguments");
            return {{md->ret}, e};
        }
        auto out = std::make_shared<Expr>(*e);
        for (size_t i = 0; i < md->params.size(); ++i) {
            Out a = check_expect(env, ctx, e->kids[i], &md->params[i].type);
            assign(env, a.tr, md->params[i].type, e->kids[i], e->span,
                   ("argument " + md->params[i].name).c_str());
            out->kids[i] = a.e;
        }
        return {{md->ret}, out};
    }

    Out check_new(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        if (e->name.rfind("List<", 0) == 0) {
            if (!e->kids.empty())
                error("arity-mismatch", e->span,
                      "new List takes no arguments");
            return {{list_type(Mdf::Mut, e->tref)}, e};
        }
        const ClassDecl* cd = p.find_class(e->name);
        if (!cd) {
            error("unknown-class", e->span, "unknown class " + e->name);
            return {{poison()}, e};
        }
        if (cd->kind == ClassKind::Interface) {
            error("abstract-instantiation", e->span,
                  "cannot instantiate interface " + e->name);
            return {{poison()}, e};
        }
        if (cd->is_capability && !ctx.is_capability_context)
            error("capability-call-outside", e->span,
                  "constructor of capability class " + e->name +
                      " called outside a capability context");
        if (e->kids.size() != cd->fields.size()) {
            error("arity-mismatch", e->span,
                  "new " + e->name + " expects " +
                      std::to_string(cd->fields.size()) + " arguments");
            return {{TypeRef{Mdf::Mut, e->name, nullptr}}, e};
        }
        auto out = std::make_shared<Expr>(*e);
        for (size_t i = 0; i < cd->fields.size(); ++i) {
            Out a = check_expect(env, ctx, e->kids[i], &cd->fields[i].type);
            assign(env, a.tr, cd->fields[i].type, e->kids[i], e->span,
                   ("field " + cd->fields[i].name).c_str());
            out->kids[i] = a.e;
        }
        return {{TypeRef{Mdf::Mut, e->name, nullptr}}, out};
    }

    Out check_try(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        // SES: code inside a try catching unchecked errors is typed as if
        // all mut variables declared outside were read.
        TypeEnv body_env = env;
        if (e->kind == Ek::Try) {
            for (auto& [n, b] : body_env.vars)
                if (b.type.mdf == Mdf::Mut) b.masked = true;
        }
        MethodContext body_ctx = ctx;
        if (e->kind == Ek::Try && ctx.receiver == Mdf::Mut)
            body_ctx.receiver = Mdf::Read;  // `this` is masked too
        Out b = check(body_env, body_ctx, e->kids[0]);
        Out c = check(env, ctx, e->kids[1]);
        // consumption propagates from both branches
        for (auto& [n, bind] : env.vars) {
            auto it = body_env.vars.find(n);
            if (it != body_env.vars.end() && it->second.consumed)
                bind.consumed = true;
        }
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = b.e;
        out->kids[1] = c.e;
        return {{join(b.tr.t, c.tr.t, e->span)}, out};
    }

    Out check_throw(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        Out v = check(env, ctx, e->kids[0]);
        if (!is_poison(v.tr.t) && v.tr.t.mdf != Mdf::Imm &&
            v.tr.t.mdf != Mdf::Capsule)
            error("throw-not-imm", e->span,
                  "only imm objects may be thrown");
        auto out = std::make_shared<Expr>(*e);
        out->kids[0] = v.e;
        return {{bottom()}, out};
    }

    void require_bool(const TR& t, Span sp, const char* what) {
        if (is_poison(t.t) || is_bottom(t.t)) return;
        if (t.t.elem || t.t.cls != "Bool")
            error("type-mismatch", sp,
                  std::string(what) + " must be a Bool, found " + t.t.str());
    }

    Out check_if(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        Out c = check(env, ctx, e->kids[0]);
        require_bool(c.tr, e->span, "if condition");
        TypeEnv then_env = env;
        Out a = check(then_env, ctx, e->kids[1]);
        TypeEnv else_env = env;
        Out b = check(else_env, ctx, e->kids[2]);
        for (auto& [n, bind] : env.vars) {
            auto i1 = then_env.vars.find(n);
            auto i2 = else_env.vars.find(n);
            bind.consumed = bind.consumed ||
                            (i1 != then_env.vars.end() && i1->second.consumed) ||
                            (i2 != else_env.vars.end() && i2->second.consumed);
        }
        auto out = std::make_shared<Expr>(*e);
        out->kids = {c.e, a.e, b.e};
        return {{join(a.tr.t, b.tr.t, e->span)}, out};
    }

    Out check_andor(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        Out a = check(env, ctx, e->kids[0]);
        Out b = check(env, ctx, e->kids[1]);
        require_bool(a.tr, e->span, "operand");
        require_bool(b.tr, e->span, "operand");
        auto out = std::make_shared<Expr>(*e);
        out->kids = {a.e, b.e};
        return {{TypeRef{Mdf::Imm, "Bool", nullptr}}, out};
    }

    Out check_prim(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        std::vector<Out> ks;
        for (const auto& k : e->kids) ks.push_back(check(env, ctx, k));
        auto out = std::make_shared<Expr>(*e);
        for (size_t i = 0; i < ks.size(); ++i) out->kids[i] = ks[i].e;
        auto scalar = [&](size_t i, const char* cls) {
            const TypeRef& t = ks[i].tr.t;
            if (is_poison(t) || is_bottom(t)) return true;
            return !t.elem && t.cls == cls;
        };
        TypeRef Bool{Mdf::Imm, "Bool", nullptr};
        TypeRef Int{Mdf::Imm, "Int", nullptr};
        TypeRef Str{Mdf::Imm, "String", nullptr};
        switch (e->prim) {
            case PrimOp::Add:
                if (scalar(0, "String") && scalar(1, "String")) {
                    out->prim = PrimOp::Concat;
                    return {{Str}, out};
                }
                [[fallthrough]];
            case PrimOp::Sub:
            case PrimOp::Mul:
            case PrimOp::Div:
            case PrimOp::Mod:
                if (!scalar(0, "Int") || !scalar(1, "Int"))
                    error("type-mismatch", e->span,
                          "arithmetic expects Int operands");
                return {{Int}, out};
            case PrimOp::Lt:
            case PrimOp::Le:
            case PrimOp::Gt:
            case PrimOp::Ge:
                if (!scalar(0, "Int") || !scalar(1, "Int"))
                    error("type-mismatch", e->span,
                          "comparison expects Int operands");
                return {{Bool}, out};
            case PrimOp::Eq:
            case PrimOp::Ne: {
                const TypeRef& a = ks[0].tr.t;
                const TypeRef& b = ks[1].tr.t;
                if (is_poison(a) || is_poison(b) || is_bottom(a) ||
                    is_bottom(b))
                    return {{Bool}, out};
                bool a_scalar = !a.elem && is_scalar_class(a.cls);
                bool b_scalar = !b.elem && is_scalar_class(b.cls);
                if (a_scalar && b_scalar && a.cls == b.cls && a.cls != "Void")
                    return {{Bool}, out};
                if (!a_scalar && !b_scalar) {
                    // reference identity on objects
                    out->prim =
                        e->prim == PrimOp::Eq ? PrimOp::RefEq : PrimOp::RefNe;
                    return {{Bool}, out};
                }
                error("type-mismatch", e->span,
                      "cannot compare " + a.str() + " with " + b.str());
                return {{Bool}, out};
            }
            case PrimOp::RefEq:
            case PrimOp::RefNe:
                return {{Bool}, out};
            case PrimOp::Not:
                require_bool(ks[0].tr, e->span, "operand of !");
                return {{Bool}, out};
            case PrimOp::Neg:
                if (!scalar(0, "Int"))
                    error("type-mismatch", e->span, "negation expects an Int");
                return {{Int}, out};
            case PrimOp::Concat:
                if (!scalar(0, "String") || !scalar(1, "String"))
                    error("type-mismatch", e->span, "concat expects Strings");
                return {{Str}, out};
            case PrimOp::IsEmpty:
                if (!scalar(0, "String"))
                    error("type-mismatch", e->span, "isEmpty expects a String");
                return {{Bool}, out};
            case PrimOp::Print:
                return {{TypeRef{Mdf::Imm, "Void", nullptr}}, out};
        }
        return {{poison()}, out};
    }

    Out check_let(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        TypeRef declared = e->tref ? *e->tref : poison();
        Out init = check_expect(env, ctx, e->kids[0], &declared);
        if (!is_poison(declared))
            assign(env, init.tr, declared, e->kids[0], e->span,
                   ("initializer of " + e->name).c_str());
        std::optional<VarBinding> saved;
        auto it = env.vars.find(e->name);
        if (it != env.vars.end()) saved = it->second;
        env.vars[e->name] = VarBinding{declared, false, false};
        Out body = check(env, ctx, e->kids[1]);
        if (saved) {
            env.vars[e->name] = *saved;
        } else {
            env.vars.erase(e->name);
        }
        auto out = std::make_shared<Expr>(*e);
        out->kids = {init.e, body.e};
        return {body.tr, out};
    }

    Out check_seq(TypeEnv& env, const MethodContext& ctx, const ExprPtr& e) {
        Out a = check(env, ctx, e->kids[0]);
        Out b = check(env, ctx, e->kids[1]);
        auto out = std::make_shared<Expr>(*e);
        out->kids = {a.e, b.e};
        return {b.tr, out};
    }

    // A capsule local consumed inside a loop body would be consumed again on
    // the next iteration.
    void loop_consumption_guard(TypeEnv& before, TypeEnv& after, Span sp) {
        for (auto& [n, b] : before.vars) {
            auto it = after.vars.find(n);
            if (it != after.vars.end() && it->second.consumed && !b.consumed) {
                error("capsule-reuse", sp,
                      "capsule local " + n + " consumed inside a loop");
                b.consumed = true;
            }
        }
    }

    Out check_for_range(TypeEnv& env, const MethodContext& ctx,
                        const ExprPtr& e) {
        Out lo = check(env, ctx, e->kids[0]);
        Out hi = check(env, ctx, e->kids[1]);
        auto is_int = [&](const TR& t) {
            return is_poison(t.t) || (!t.t.elem && t.t.cls == "Int");
        };
        if (!is_int(lo.tr) || !is_int(hi.tr))
            error("type-mismatch", e->span, "loop bounds must be Ints");
        if (e->tref && (e->tref->elem || e->tref->cls != "Int"))
            error("type-mismatch", e->span, "counted loop variable must be Int");
        TypeEnv body_env = env;
        body_env.vars[e->name] =
            VarBinding{TypeRef{Mdf::Imm, "Int", nullptr}, false, false};
        Out body = check(body_env, ctx, e->kids[2]);
        loop_consumption_guard(env, body_env, e->span);
        auto out = std::make_shared<Expr>(*e);
        out->kids = {lo.e, hi.e, body.e};
        return {{TypeRef{Mdf::Imm, "Void", nullptr}}, out};
    }

    Out check_foreach(TypeEnv& env, const MethodContext& ctx,
                      const ExprPtr& e) {
        Out lst = check(env, ctx, e->kids[0]);
        TypeRef elem = poison();
        if (!is_poison(lst.tr.t)) {
            if (!lst.tr.t.elem) {
                error("type-mismatch", e->span,
                      "for-each expects a List, found " + lst.tr.t.str());
            } else {
                elem = *lst.tr.t.elem;
                Mdf eff = lst.tr.flex ? Mdf::Mut : lst.tr.t.mdf;
                elem.mdf = viewpoint(eff, lst.tr.t.elem->mdf);
                if (!lst.tr.flex && lst.tr.t.mdf == Mdf::Imm)
                    elem.mdf = Mdf::Imm;
                if (e->tref && !same_type(*e->tref, elem) && diags)
                    error("modifier-mismatch", e->span,
                          "loop variable " + e->name + " must be declared " +
                              elem.str());
            }
        }
        TypeEnv body_env = env;
        body_env.vars[e->name] = VarBinding{elem, false, false};
        Out body = check(body_env, ctx, e->kids[1]);
        loop_consumption_guard(env, body_env, e->span);
        auto out = std::make_shared<Expr>(*e);
        out->kids = {lst.e, body.e};
        if (e->kind == Ek::ForEachAll) {
            require_bool(body.tr, e->span, "fold predicate");
            return {{TypeRef{Mdf::Imm, "Bool", nullptr}}, out};
        }
        return {{TypeRef{Mdf::Imm, "Void", nullptr}}, out};
    }

    Out check_monitor(TypeEnv& env, const MethodContext& ctx,
                      const ExprPtr& e) {
        Out body = check(env, ctx, e->kids[0]);
        Out chk = check(env, ctx, e->kids[1]);
        require_bool(chk.tr, e->span, "monitor check");
        auto out = std::make_shared<Expr>(*e);
        out->kids = {body.e, chk.e};
        return {body.tr, out};
    }

    Out check_precheck(TypeEnv& env, const MethodContext& ctx,
                       const ExprPtr& e) {
        Out chk = check(env, ctx, e->kids[0]);
        require_bool(chk.tr, e->span, "entry check");
        Out pend = check(env, ctx, e->kids[1]);
        auto out = std::make_shared<Expr>(*e);
        out->kids = {chk.e, pend.e};
        return {pend.tr, out};
    }
};

MethodContext method_context(const Program& p, const ClassDecl& c,
                             const MethodDecl& m) {
    MethodContext ctx;
    ctx.enclosing_class = c.name;
    ctx.receiver = m.receiver;
    ctx.is_static = m.is_static;
    ctx.is_capability_context =
        m.is_capability ||
        (c.is_capability && !m.is_static &&
         (m.receiver == Mdf::Mut || m.receiver == Mdf::Capsule));
    ctx.in_capsule_mutator = is_capsule_mutator(p, c, m);
    ctx.in_invariant = m.name == "invariant";
    return ctx;
}

void check_interface_conformance(const Program& p, const ClassDecl& c,
                                 const std::string& iface,
                                 std::vector<Diagnostic>& out) {
    const ClassDecl* icd = p.find_class(iface);
    if (!icd || icd->kind != ClassKind::Interface) return;
    for (const auto& im : icd->methods) {
        if (im.synthesized) continue;
        const MethodDecl* cm = c.find_method(im.name);
        if (!cm) {
            out.push_back(Diagnostic{Severity::Error, "iface-missing-method",
                                     c.span,
                                     c.name + " does not implement " + iface +
                                         "." + im.name});
            continue;
        }
        bool sig_ok = cm->receiver == im.receiver &&
                      cm->is_static == im.is_static &&
                      same_type(cm->ret, im.ret) &&
                      cm->params.size() == im.params.size();
        if (sig_ok)
            for (size_t i = 0; i < im.params.size(); ++i)
                sig_ok = sig_ok &&
                         same_type(cm->params[i].type, im.params[i].type);
        if (!sig_ok)
            out.push_back(Diagnostic{
                Severity::Error, "iface-signature-mismatch", cm->span,
                c.name + "." + im.name + " does not match the signature in " +
                    iface});
    }
    for (const auto& parent : icd->implements)
        check_interface_conformance(p, c, parent, out);
}

}  // namespace

TypeckResult typecheck_program(const Program& p) {
    TypeckResult res;
    res.program = p;
    Checker ck{p, &res.diagnostics};
    for (auto& [name, cd] : res.program.classes) {
        if (cd.kind == ClassKind::Class)
            for (const auto& i : cd.implements)
                check_interface_conformance(p, cd, i, res.diagnostics);
        for (auto& m : cd.methods) {
            if (!m.body) continue;
            TypeEnv env;
            for (const auto& prm : m.params)
                env.vars[prm.name] = VarBinding{prm.type, false, false};
            MethodContext ctx = method_context(p, cd, m);
            auto out = ck.check_expect(env, ctx, m.body, &m.ret);
            ck.assign(env, out.tr, m.ret, m.body, m.span,
                      ("return value of " + cd.name + "." + m.name).c_str());
            m.body = out.e;
        }
    }
    if (res.program.main) {
        TypeEnv env;
        env.vars["cap"] = VarBinding{TypeRef{Mdf::Mut, "Cap", nullptr}, false,
                                     false};
        MethodContext ctx;
        ctx.is_capability_context = true;  // main expressions may use caps
        ctx.is_static = true;
        auto out = ck.check(env, ctx, res.program.main);
        res.program.main = out.e;
    }
    return res;
}

std::optional<TypeRef> typecheck_expr(const Program& p, TypeEnv& env,
                                      const MethodContext& ctx,
                                      const ExprPtr& e,
                                      std::vector<Diagnostic>& diags,
                                      ExprPtr* elaborated) {
    Checker ck{p, &diags};
    auto out = ck.check(env, ctx, e);
    if (elaborated) *elaborated = out.e;
    if (ck.failed) return std::nullopt;
    return out.tr.t;
}

std::optional<TypeRef> try_promote(const Program& p, TypeEnv& env,
                                   const MethodContext& ctx, const ExprPtr& e,
                                   Mdf target,
                                   std::vector<Diagnostic>& diags) {
    Checker ck{p, &diags};
    TypeEnv scratch = env;
    auto out = ck.check(scratch, ctx, e);
    if (ck.failed) return std::nullopt;
    if (out.tr.t.mdf == Mdf::Capsule) {
        TypeRef r = out.tr.t;
        r.mdf = target;  // capsule converts to imm/capsule freely
        return r;
    }
    if (out.tr.t.mdf != Mdf::Mut) {
        diags.push_back(Diagnostic{Severity::Error, "promotion-failed",
                                   e->span,
                                   "only mut expressions can be promoted"});
        return std::nullopt;
    }
    std::vector<std::string> offenders;
    if (!ck.promotable(env, e, target, &offenders)) {
        std::string names;
        for (const auto& o : offenders)
            names += (names.empty() ? "" : ", ") + o;
        diags.push_back(Diagnostic{Severity::Error, "promotion-failed",
                                   e->span,
                                   "free variables block promotion: " + names});
        return std::nullopt;
    }
    TypeRef r = out.tr.t;
    r.mdf = target;
    return r;
}

Mdf viewpoint_adapt(Mdf receiver, Mdf field) {
    if (field == Mdf::Imm) return Mdf::Imm;
    if (receiver == Mdf::Imm) return Mdf::Imm;
    if (receiver == Mdf::Read) return Mdf::Read;
    if (field == Mdf::Mut) return Mdf::Mut;
    return Mdf::Read;
}

bool is_pure_method(const Program& p, const std::string& cls,
                    const std::string& m) {
    const MethodDecl* md = lookup_method(p, cls, m);
    if (!md) return false;
    if (!md->is_static &&
        !(md->receiver == Mdf::Read || md->receiver == Mdf::Imm))
        return false;
    for (const auto& prm : md->params)
        if (prm.type.mdf != Mdf::Read && prm.type.mdf != Mdf::Imm)
            return false;
    return true;
}

std::optional<TypeRef> typecheck_runtime_expr(
    const Program& p, const std::vector<std::string>& sigma_classes,
    const std::vector<std::shared_ptr<const TypeRef>>& sigma_list_elems,
    const ExprPtr& e, const Expr* probe) {
    Checker ck{p, nullptr};
    ck.sigma = &sigma_classes;
    ck.sigma_elems = &sigma_list_elems;
    ck.probe = probe;
    TypeEnv env;
    MethodContext ctx;
    ctx.is_capability_context = true;
    ctx.is_static = true;
    auto out = ck.check(env, ctx, e);
    if (ck.failed) return std::nullopt;
    return out.tr.t;
}

}  // namespace ivl
