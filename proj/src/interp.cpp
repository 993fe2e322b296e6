#include "ivl/interp.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "ivl/parser.hpp"

namespace ivl {

ExprPtr value_to_expr(const Value& v) {
    switch (v.k) {
        case Value::Unit: return expr_unit();
        case Value::Bool: return expr_bool(v.i != 0);
        case Value::Int: return expr_int(v.i);
        case Value::Str: return expr_str(*v.s);
        case Value::Loc: return expr_loc(v.i);
    }
    return expr_unit();
}

Value expr_to_value(const Expr& e) {
    switch (e.kind) {
        case Ek::UnitLit: return Value::unit();
        case Ek::BoolLit: return Value::boolean(e.ival != 0);
        case Ek::IntLit: return Value::integer(e.ival);
        case Ek::StrLit: return Value::str(e.sval);
        case Ek::Loc: return Value::loc(e.ival);
        default: throw InterpPanic("expr_to_value on non-value");
    }
}

namespace {

std::string render_value(const Value& v) {
    switch (v.k) {
        case Value::Unit: return "unit";
        case Value::Bool: return v.i ? "true" : "false";
        case Value::Int: return std::to_string(v.i);
        case Value::Str: return *v.s;
        case Value::Loc: return "@" + std::to_string(v.i);
    }
    return "?";
}

// Evaluation-context child positions, in evaluation order.
std::vector<int> context_children(const Expr& e) {
    switch (e.kind) {
        case Ek::MCall:
        case Ek::SCall:
        case Ek::New:
        case Ek::Prim: {
            std::vector<int> all(e.kids.size());
            for (size_t i = 0; i < e.kids.size(); ++i) all[i] = (int)i;
            return all;
        }
        case Ek::FieldAcc: return {0};
        case Ek::FieldUpd: return {0, 1};
        case Ek::Monitor: return {0, 1};
        case Ek::PreCheck: return {0};
        case Ek::TryAnn: return {0};
        case Ek::If:
        case Ek::Let:
        case Ek::Seq:
        case Ek::And:
        case Ek::Or:
        case Ek::Throw: return {0};
        case Ek::ForRange: return {0, 1};
        case Ek::ForEachUnit:
        case Ek::ForEachAll: return {0};
        default: return {};
    }
}

}  // namespace

Decomp decompose(const ExprPtr& e) {
    Decomp d;
    ExprPtr cur = e;
    for (;;) {
        if (is_error_atom(*cur)) {
            // bubble to the nearest enclosing annotated try
            for (int i = static_cast<int>(d.path.size()) - 1; i >= 0; --i) {
                if (d.path[i].node->kind == Ek::TryAnn) {
                    d.redex = d.path[i].node;
                    d.path.resize(i);
                    d.cls = Decomp::Redex;
                    return d;
                }
            }
            d.cls = Decomp::Err;
            return d;
        }
        if (is_value(*cur)) {
            if (d.path.empty()) {
                d.cls = Decomp::Value;
                return d;
            }
            throw InterpPanic("decompose descended into a value");
        }
        bool descended = false;
        for (int c : context_children(*cur)) {
            const ExprPtr& kid = cur->kids[static_cast<size_t>(c)];
            if (!is_value(*kid)) {
                d.path.push_back(CtxFrame{cur, c});
                cur = kid;
                descended = true;
                break;
            }
        }
        if (descended) continue;
        if (cur->kind == Ek::Var)
            throw InterpPanic("stuck: unbound variable " + cur->name);
        d.cls = Decomp::Redex;
        d.redex = cur;
        return d;
    }
}

namespace {

ExprPtr rebuild(const std::vector<CtxFrame>& path, ExprPtr replacement) {
    for (int i = static_cast<int>(path.size()) - 1; i >= 0; --i) {
        auto n = std::make_shared<Expr>(*path[i].node);
        n->kids[static_cast<size_t>(path[i].child)] = replacement;
        replacement = n;
    }
    return replacement;
}

// Structural equality for the built-in List search methods: scalars by
// value, objects by class and imm-field recursion, mutable state by
// identity.
bool value_eq(const Program& prog, const Memory& mem, const Value& a,
              const Value& b, std::set<std::pair<int64_t, int64_t>>& seen) {
    if (a.k != b.k) return false;
    if (a.k != Value::Loc) return a == b;
    if (a.i == b.i) return true;
    if (!seen.insert({a.i, b.i}).second) return true;
    const Obj& oa = mem.at(a.i);
    const Obj& ob = mem.at(b.i);
    if (oa.cls != ob.cls || oa.is_list != ob.is_list) return false;
    if (oa.is_list) {
        if (oa.fields.size() != ob.fields.size()) return false;
        bool imm_elems = oa.list_elem && oa.list_elem->mdf == Mdf::Imm;
        for (size_t i = 0; i < oa.fields.size(); ++i) {
            if (imm_elems) {
                if (!value_eq(prog, mem, oa.fields[i], ob.fields[i], seen))
                    return false;
            } else if (oa.fields[i] != ob.fields[i]) {
                return false;
            }
        }
        return true;
    }
    const ClassDecl* cd = prog.find_class(oa.cls);
    if (!cd || cd->fields.size() != oa.fields.size()) return false;
    for (size_t i = 0; i < cd->fields.size(); ++i) {
        if (cd->fields[i].type.mdf == Mdf::Imm) {
            if (!value_eq(prog, mem, oa.fields[i], ob.fields[i], seen))
                return false;
        } else if (oa.fields[i] != ob.fields[i]) {
            return false;
        }
    }
    return true;
}

int64_t wrap_add(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) +
                                static_cast<uint64_t>(b));
}
int64_t wrap_sub(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) -
                                static_cast<uint64_t>(b));
}
int64_t wrap_mul(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) *
                                static_cast<uint64_t>(b));
}

ExprPtr error_expr(const std::string& msg) {
    auto e = std::make_shared<Expr>();
    e->kind = Ek::Error;
    e->sval = msg;
    return e;
}

}  // namespace

Machine::Machine(const Program& prog, ProtocolMode mode)
    : prog_(prog), mode_(mode) {
    reset();
}

void Machine::reset() {
    cfg = Config{};
    // location 0 is the Cap object; its mut List fields start empty
    Obj cap;
    cap.cls = "Cap";
    cfg.mem.alloc(cap);
    const ClassDecl* cd = prog_.find_class("Cap");
    if (cd) {
        std::vector<Value> fields;
        for (const auto& f : cd->fields) {
            Obj lst;
            lst.cls = f.type.str();
            lst.is_list = true;
            lst.list_elem = f.type.elem;
            fields.push_back(Value::loc(cfg.mem.alloc(std::move(lst))));
        }
        cfg.mem.at(0).fields = std::move(fields);
    }
    std::map<std::string, ExprPtr> binding;
    binding["cap"] = expr_loc(0);
    cfg.expr = substitute(prog_.main ? prog_.main : expr_bool(true), binding);
}

ExprPtr Machine::invariant_call(int64_t l) const {
    auto call = std::make_shared<Expr>();
    call->kind = Ek::MCall;
    call->name = "invariant";
    call->flag = true;
    call->kids = {expr_loc(l)};
    return call;
}

bool Machine::suppressed(int64_t l) const {
    for (const auto& f : cfg.check_stack)
        if (f.loc == l) return true;
    return false;
}

// Keeps the in-flight check stack aligned with the active check slots on the
// current decomposition path. Frames discarded abruptly (try error unwound
// past them) pop uncounted: their checks never completed.
void Machine::sync_check_stack(const std::vector<CtxFrame>& path,
                               bool /*count_pops*/) {
    std::vector<std::pair<int64_t, CheckSite>> chain;
    for (const auto& fr : path) {
        if (fr.node->kind == Ek::Monitor && fr.child == 1) {
            CheckSite site = CheckSite::Ctor;
            switch (fr.node->msite) {
                case MonSite::Update: site = CheckSite::FieldUpdate; break;
                case MonSite::NewObj: site = CheckSite::Ctor; break;
                case MonSite::CapsuleMutator:
                    site = CheckSite::CapsuleMutatorExit;
                    break;
                case MonSite::VsExit: site = CheckSite::MethodExit; break;
            }
            chain.emplace_back(fr.node->ival, site);
        } else if (fr.node->kind == Ek::PreCheck && fr.child == 0) {
            chain.emplace_back(fr.node->ival, CheckSite::MethodEntry);
        }
    }
    size_t common = 0;
    while (common < chain.size() && common < cfg.check_stack.size() &&
           cfg.check_stack[common].loc == chain[common].first &&
           cfg.check_stack[common].site == chain[common].second)
        ++common;
    cfg.check_stack.resize(common);  // aborted checks, never completed
    for (size_t i = common; i < chain.size(); ++i) {
        CheckFrame f;
        f.loc = chain[i].first;
        f.site = chain[i].second;
        f.cls = cfg.mem.contains(f.loc) ? cfg.mem.at(f.loc).cls : "?";
        f.substeps = 0;
        f.alloc_watermark = cfg.mem.size();
        cfg.check_stack.push_back(std::move(f));
    }
}

namespace {

// Assert the check allocated nothing that survives, then drop its
// allocations (checks are observably pure).
void rollback_check_allocs(Memory& mem, const ExprPtr& expr,
                           size_t watermark) {
    if (mem.size() <= watermark) return;
    for (size_t l = 0; l < watermark; ++l)
        for (const auto& v : mem.store[l].fields)
            if (v.k == Value::Loc && v.i >= static_cast<int64_t>(watermark))
                throw InterpPanic(
                    "invariant check leaked an allocation into memory");
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
        if (e->kind == Ek::Loc && e->ival >= static_cast<int64_t>(watermark))
            throw InterpPanic(
                "invariant check leaked an allocation into the expression");
        for (const auto& k : e->kids) scan(k);
    };
    scan(expr);
    mem.store.resize(watermark);
    ++mem.version;
}

}  // namespace

std::optional<std::string> Machine::step() {
    Decomp d = decompose(cfg.expr);
    if (d.cls == Decomp::Value) return std::nullopt;
    if (d.cls == Decomp::Err) {
        sync_check_stack(d.path, false);
        return std::nullopt;
    }
    sync_check_stack(d.path, true);

    // independent fuel for invariant-check sub-evaluations: exhaustion is an
    // invariant failure (a non-terminating invariant is not valid)
    for (auto& f : cfg.check_stack) ++f.substeps;
    for (size_t i = 0; i < cfg.check_stack.size(); ++i) {
        if (cfg.check_stack[i].substeps <= check_fuel) continue;
        // locate the i-th check slot on the path and fail it
        size_t seen = 0;
        for (size_t pi = 0; pi < d.path.size(); ++pi) {
            const CtxFrame& fr = d.path[pi];
            bool is_slot = (fr.node->kind == Ek::Monitor && fr.child == 1) ||
                           (fr.node->kind == Ek::PreCheck && fr.child == 0);
            if (!is_slot) continue;
            if (seen++ != i) continue;
            auto n = std::make_shared<Expr>(*fr.node);
            // exhaustion counts as a failed check; count_only pretends it
            // passed so counting can continue
            n->kids[static_cast<size_t>(fr.child)] =
                expr_bool(mode_.count_only);
            CheckFrame done = cfg.check_stack[i];
            cfg.check_stack.resize(i);
            std::vector<CtxFrame> prefix(d.path.begin(), d.path.begin() + pi);
            cfg.expr = rebuild(prefix, n);
            if (on_check_complete) on_check_complete(done, false);
            cfg.checks.bump(done.cls, done.site);
            rollback_check_allocs(cfg.mem, cfg.expr, done.alloc_watermark);
            ++cfg.steps;
            return "check-fuel-exhausted";
        }
        throw InterpPanic("check frame without a matching slot");
    }

    std::string rule;
    ExprPtr replacement = apply_redex(d, rule);
    ExprPtr new_expr = rebuild(d.path, replacement);

    // A check completes when its slot reduces to a boolean literal.
    if (!d.path.empty() && replacement->kind == Ek::BoolLit) {
        const CtxFrame& parent = d.path.back();
        bool slot = (parent.node->kind == Ek::Monitor && parent.child == 1) ||
                    (parent.node->kind == Ek::PreCheck && parent.child == 0);
        if (slot) {
            if (cfg.check_stack.empty())
                throw InterpPanic("check completed without a frame");
            CheckFrame done = cfg.check_stack.back();
            cfg.check_stack.pop_back();
            bool passed = replacement->ival != 0;
            if (!passed && mode_.count_only) {
                // tolerate the failure: rewrite the slot to true
                auto n = std::make_shared<Expr>(*parent.node);
                n->kids[static_cast<size_t>(parent.child)] = expr_bool(true);
                std::vector<CtxFrame> prefix(d.path.begin(),
                                             d.path.end() - 1);
                new_expr = rebuild(prefix, n);
            }
            if (on_check_complete) on_check_complete(done, passed);
            cfg.checks.bump(done.cls, done.site);
            rollback_check_allocs(cfg.mem, new_expr, done.alloc_watermark);
        }
    }

    cfg.expr = new_expr;
    ++cfg.steps;
    return rule;
}

ExprPtr Machine::apply_redex(const Decomp& d, std::string& rule) {
    const ExprPtr& r = d.redex;
    auto assert_monitor_wf = [&](int64_t l) {
        for (const auto& fr : d.path) {
            if (fr.node->kind == Ek::TryAnn && fr.node->snapshot &&
                static_cast<size_t>(l) < fr.node->snapshot->store.size())
                throw InterpPanic(
                    "monitor injected on a location preserved by a try");
        }
    };
    auto with_monitor = [&](int64_t l, ExprPtr body, MonSite site) {
        assert_monitor_wf(l);
        auto m = std::make_shared<Expr>();
        m->kind = Ek::Monitor;
        m->ival = l;
        m->msite = site;
        m->kids = {std::move(body), invariant_call(l)};
        return m;
    };
    auto declared_inv = [&](const std::string& cls) {
        const ClassDecl* cd = prog_.find_class(cls);
        return cd && cd->has_declared_invariant();
    };

    switch (r->kind) {
        case Ek::Try: {
            rule = "try-enter";
            auto t = std::make_shared<Expr>(*r);
            t->kind = Ek::TryAnn;
            t->snapshot = cfg.mem.snapshot();
            return t;
        }
        case Ek::TryAnn: {
            if (is_value(*r->kids[0])) {
                rule = "try-ok";
                return r->kids[0];
            }
            // try error: restore the snapshot domain; preserved locations
            // must be untouched (strong exception safety)
            rule = "try-error";
            const auto& snap = r->snapshot->store;
            if (cfg.mem.size() < snap.size())
                throw InterpPanic("memory shrank below a try snapshot");
            for (size_t l = 0; l < snap.size(); ++l) {
                const Obj& now = cfg.mem.store[l];
                const Obj& then = snap[l];
                if (now.cls != then.cls ||
                    now.fields.size() != then.fields.size())
                    throw InterpPanic(
                        "try body mutated preserved memory (SES violation)");
                for (size_t i = 0; i < now.fields.size(); ++i)
                    if (now.fields[i] != then.fields[i])
                        throw InterpPanic(
                            "try body mutated preserved memory (SES violation)");
            }
            cfg.mem.store.resize(snap.size());
            ++cfg.mem.version;
            return r->kids[1];
        }
        case Ek::Monitor: {
            // body and check are values; a false check is an error atom and
            // never reaches here
            rule = "monitor-exit";
            if (r->kids[1]->kind != Ek::BoolLit || r->kids[1]->ival != 1)
                throw InterpPanic("monitor check reduced to a non-boolean");
            return r->kids[0];
        }
        case Ek::PreCheck: {
            rule = "precheck-pass";
            if (r->kids[0]->kind != Ek::BoolLit || r->kids[0]->ival != 1)
                throw InterpPanic("entry check reduced to a non-boolean");
            return r->kids[1];
        }
        case Ek::FieldUpd: {
            rule = "update";
            int64_t l = r->kids[0]->ival;
            if (r->kids[0]->kind != Ek::Loc || !cfg.mem.contains(l))
                throw InterpPanic("field update on a non-location");
            Obj& o = cfg.mem.at(l);
            const ClassDecl* cd = prog_.find_class(o.cls);
            int idx = cd ? cd->field_index(r->name) : -1;
            if (idx < 0) throw InterpPanic("unknown field " + r->name);
            o.fields[static_cast<size_t>(idx)] = expr_to_value(*r->kids[1]);
            ++cfg.mem.version;
            CheckEvent ev;
            ev.kind = CheckEvent::FieldUpdate;
            ev.cls = o.cls;
            if (check_events(prog_, mode_, ev))
                return with_monitor(l, expr_loc(l), MonSite::Update);
            return expr_loc(l);
        }
        case Ek::FieldAcc: {
            rule = "access";
            int64_t l = r->kids[0]->ival;
            if (r->kids[0]->kind != Ek::Loc || !cfg.mem.contains(l))
                throw InterpPanic("field access on a non-location");
            const Obj& o = cfg.mem.at(l);
            const ClassDecl* cd = prog_.find_class(o.cls);
            int idx = cd ? cd->field_index(r->name) : -1;
            if (idx < 0) throw InterpPanic("unknown field " + r->name);
            return value_to_expr(o.fields[static_cast<size_t>(idx)]);
        }
        case Ek::New: {
            rule = "new";
            if (r->name.rfind("List<", 0) == 0) {
                Obj lst;
                lst.cls = r->name;
                lst.is_list = true;
                lst.list_elem = r->tref;
                return expr_loc(cfg.mem.alloc(std::move(lst)));
            }
            Obj o;
            o.cls = r->name;
            for (const auto& k : r->kids) o.fields.push_back(expr_to_value(*k));
            int64_t l = cfg.mem.alloc(std::move(o));
            CheckEvent ev;
            ev.kind = CheckEvent::CtorExit;
            ev.cls = r->name;
            if (check_events(prog_, mode_, ev))
                return with_monitor(l, expr_loc(l), MonSite::NewObj);
            return expr_loc(l);
        }
        case Ek::MCall: return apply_mcall(r, rule);
        case Ek::SCall: {
            if (r->name.rfind("List", 0) == 0 && r->name2 == "of") {
                rule = "new";
                Obj lst;
                lst.cls = r->name;
                lst.is_list = true;
                lst.list_elem = r->tref;
                for (const auto& k : r->kids)
                    lst.fields.push_back(expr_to_value(*k));
                return expr_loc(cfg.mem.alloc(std::move(lst)));
            }
            rule = "mcall";
            const ClassDecl* cd = prog_.find_class(r->name);
            const MethodDecl* md = cd ? cd->find_method(r->name2) : nullptr;
            if (!md || !md->is_static || !md->body)
                throw InterpPanic("unknown static method " + r->name + "." +
                                  r->name2);
            std::map<std::string, ExprPtr> b;
            for (size_t i = 0; i < md->params.size(); ++i)
                b[md->params[i].name] = r->kids[i];
            return substitute(md->body, b);
        }
        case Ek::Prim: return apply_prim(r, rule);
        case Ek::And: {
            rule = "and";
            if (r->kids[0]->ival == 0) return expr_bool(false);
            return r->kids[1];
        }
        case Ek::Or: {
            rule = "or";
            if (r->kids[0]->ival != 0) return expr_bool(true);
            return r->kids[1];
        }
        case Ek::If: {
            rule = "if";
            return r->kids[0]->ival != 0 ? r->kids[1] : r->kids[2];
        }
        case Ek::Let: {
            rule = "let";
            return substitute(r->kids[1], {{r->name, r->kids[0]}});
        }
        case Ek::Seq: {
            rule = "seq";
            return r->kids[1];
        }
        case Ek::Throw: {
            rule = "throw";
            return error_expr(render_value(expr_to_value(*r->kids[0])));
        }
        case Ek::ForRange: {
            rule = "for-range";
            int64_t lo = r->kids[0]->ival;
            int64_t hi = r->kids[1]->ival;
            if (lo >= hi) return expr_unit();
            ExprPtr iter = substitute(r->kids[2], {{r->name, expr_int(lo)}});
            auto next = std::make_shared<Expr>(*r);
            next->kids[0] = expr_int(lo + 1);
            auto seq = std::make_shared<Expr>();
            seq->kind = Ek::Seq;
            seq->kids = {iter, next};
            return seq;
        }
        case Ek::ForEachUnit:
        case Ek::ForEachAll: {
            rule = r->kind == Ek::ForEachUnit ? "for-each" : "for-all";
            int64_t l = r->kids[0]->ival;
            if (r->kids[0]->kind != Ek::Loc || !cfg.mem.contains(l) ||
                !cfg.mem.at(l).is_list)
                throw InterpPanic("for-each over a non-list");
            const Obj& lst = cfg.mem.at(l);
            int64_t i = r->ival;
            if (i >= static_cast<int64_t>(lst.fields.size()))
                return r->kind == Ek::ForEachUnit ? expr_unit()
                                                  : expr_bool(true);
            ExprPtr elem = value_to_expr(lst.fields[static_cast<size_t>(i)]);
            ExprPtr iter = substitute(r->kids[1], {{r->name, elem}});
            auto next = std::make_shared<Expr>(*r);
            next->ival = i + 1;
            if (r->kind == Ek::ForEachUnit) {
                auto seq = std::make_shared<Expr>();
                seq->kind = Ek::Seq;
                seq->kids = {iter, next};
                return seq;
            }
            auto br = std::make_shared<Expr>();
            br->kind = Ek::If;
            br->kids = {iter, next, expr_bool(false)};
            return br;
        }
        default:
            throw InterpPanic("no reduction rule applies");
    }
}

ExprPtr Machine::apply_mcall(const ExprPtr& r, std::string& rule) {
    rule = "mcall";
    if (r->kids[0]->kind != Ek::Loc)
        throw InterpPanic("method call on a non-location (unelaborated "
                          "program?)");
    int64_t l = r->kids[0]->ival;
    if (!cfg.mem.contains(l)) throw InterpPanic("dangling location");
    const Obj& o = cfg.mem.at(l);
    if (o.is_list) return apply_list_native(r, l, rule);

    const ClassDecl* cd = prog_.find_class(o.cls);
    const MethodDecl* md = cd ? cd->find_method(r->name) : nullptr;
    if (!md || !md->body)
        throw InterpPanic("unknown method " + o.cls + "." + r->name);
    std::map<std::string, ExprPtr> b;
    b["this"] = r->kids[0];
    for (size_t i = 0; i < md->params.size(); ++i)
        b[md->params[i].name] = r->kids[i + 1];
    ExprPtr body = substitute(md->body, b);

    if (mode_.kind == ProtocolKind::Paper) {
        if (is_capsule_mutator(prog_, *cd, *md)) {
            auto m = std::make_shared<Expr>();
            m->kind = Ek::Monitor;
            m->ival = l;
            m->msite = MonSite::CapsuleMutator;
            m->kids = {body, invariant_call(l)};
            return m;
        }
        return body;
    }

    CheckEvent entry;
    entry.kind = CheckEvent::McallEntry;
    entry.cls = o.cls;
    entry.method = r->name;
    entry.qualified = r->flag;
    bool fire_entry = check_events(prog_, mode_, entry) && !suppressed(l);
    CheckEvent exit = entry;
    exit.kind = CheckEvent::McallExit;
    bool fire_exit = check_events(prog_, mode_, exit) && !suppressed(l);

    ExprPtr result = body;
    if (fire_exit) {
        auto m = std::make_shared<Expr>();
        m->kind = Ek::Monitor;
        m->ival = l;
        m->msite = MonSite::VsExit;
        m->kids = {result, invariant_call(l)};
        result = m;
    }
    if (fire_entry) {
        auto pre = std::make_shared<Expr>();
        pre->kind = Ek::PreCheck;
        pre->ival = l;
        pre->kids = {invariant_call(l), result};
        result = pre;
    }
    return result;
}

ExprPtr Machine::apply_list_native(const ExprPtr& r, int64_t l,
                                   std::string& rule) {
    rule = "native";
    Obj& o = cfg.mem.at(l);
    size_t nargs = r->kids.size() - 1;
    if (r->name == "add" && nargs == 1) {
        o.fields.push_back(expr_to_value(*r->kids[1]));
        ++cfg.mem.version;
        return expr_unit();
    }
    if (r->name == "get" && nargs == 1) {
        int64_t i = r->kids[1]->ival;
        if (r->kids[1]->kind != Ek::IntLit || i < 0 ||
            i >= static_cast<int64_t>(o.fields.size()))
            return error_expr("List index out of range: " + std::to_string(i));
        return value_to_expr(o.fields[static_cast<size_t>(i)]);
    }
    if (r->name == "size" && nargs == 0)
        return expr_int(static_cast<int64_t>(o.fields.size()));
    if ((r->name == "indexOf" || r->name == "contains") && nargs == 1) {
        Value needle = expr_to_value(*r->kids[1]);
        int64_t found = -1;
        for (size_t i = 0; i < o.fields.size(); ++i) {
            std::set<std::pair<int64_t, int64_t>> seen;
            if (value_eq(prog_, cfg.mem, o.fields[i], needle, seen)) {
                found = static_cast<int64_t>(i);
                break;
            }
        }
        if (r->name == "indexOf") return expr_int(found);
        return expr_bool(found >= 0);
    }
    throw InterpPanic("unknown List method " + r->name);
}

ExprPtr Machine::apply_prim(const ExprPtr& r, std::string& rule) {
    rule = "prim";
    auto iv = [&](size_t i) { return r->kids[i]->ival; };
    switch (r->prim) {
        case PrimOp::Add: return expr_int(wrap_add(iv(0), iv(1)));
        case PrimOp::Sub: return expr_int(wrap_sub(iv(0), iv(1)));
        case PrimOp::Mul: return expr_int(wrap_mul(iv(0), iv(1)));
        case PrimOp::Div:
            if (iv(1) == 0) return error_expr("division by zero");
            if (iv(0) == INT64_MIN && iv(1) == -1) return expr_int(INT64_MIN);
            return expr_int(iv(0) / iv(1));
        case PrimOp::Mod:
            if (iv(1) == 0) return error_expr("division by zero");
            if (iv(0) == INT64_MIN && iv(1) == -1) return expr_int(0);
            return expr_int(iv(0) % iv(1));
        case PrimOp::Lt: return expr_bool(iv(0) < iv(1));
        case PrimOp::Le: return expr_bool(iv(0) <= iv(1));
        case PrimOp::Gt: return expr_bool(iv(0) > iv(1));
        case PrimOp::Ge: return expr_bool(iv(0) >= iv(1));
        case PrimOp::Eq:
        case PrimOp::Ne: {
            Value a = expr_to_value(*r->kids[0]);
            Value b = expr_to_value(*r->kids[1]);
            bool eq = a == b;
            return expr_bool(r->prim == PrimOp::Eq ? eq : !eq);
        }
        case PrimOp::RefEq:
        case PrimOp::RefNe: {
            bool eq = r->kids[0]->kind == r->kids[1]->kind &&
                      r->kids[0]->ival == r->kids[1]->ival;
            return expr_bool(r->prim == PrimOp::RefEq ? eq : !eq);
        }
        case PrimOp::Not: return expr_bool(iv(0) == 0);
        case PrimOp::Neg: return expr_int(wrap_sub(0, iv(0)));
        case PrimOp::Concat:
            return expr_str(r->kids[0]->sval + r->kids[1]->sval);
        case PrimOp::IsEmpty: return expr_bool(r->kids[0]->sval.empty());
        case PrimOp::Print:
            cfg.mem.output_log.push_back(
                render_value(expr_to_value(*r->kids[1])));
            return expr_unit();
    }
    throw InterpPanic("unknown primitive");
}

bool Machine::at_value() const {
    return decompose(cfg.expr).cls == Decomp::Value;
}

bool Machine::at_error() const {
    return decompose(cfg.expr).cls == Decomp::Err;
}

Value Machine::result_value() const {
    if (!is_value(*cfg.expr)) throw InterpPanic("not at a value");
    return expr_to_value(*cfg.expr);
}

RunResult Machine::run(uint64_t fuel) {
    RunResult res;
    for (;;) {
        if (cfg.steps >= fuel) {
            res.outcome = RunResult::FuelExhausted;
            break;
        }
        auto r = step();
        if (!r) {
            res.outcome = at_error() ? RunResult::Error : RunResult::Value;
            if (res.outcome == RunResult::Value)
                res.value = expr_to_value(*cfg.expr);
            break;
        }
    }
    res.mem = cfg.mem;
    res.checks = cfg.checks;
    res.steps = cfg.steps;
    return res;
}

RunResult run(const Program& prog, ProtocolMode mode, uint64_t fuel) {
    Machine m(prog, mode);
    return m.run(fuel);
}

std::string trace_line(uint64_t step, const std::string& rule,
                       const ExprPtr& redex, uint64_t delta) {
    std::ostringstream os;
    os << step << ' ' << rule;
    if (redex) {
        std::string s = pretty_expr(redex);
        if (s.size() > 80) s = s.substr(0, 77) + "...";
        os << ' ' << s;
    }
    if (delta) os << " +" << delta << " checks";
    return os.str();
}

}  // namespace ivl
