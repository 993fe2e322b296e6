#include "ivl/oracle.hpp"

#include <deque>
#include <functional>

#include "ivl/typecheck.hpp"

namespace ivl {

namespace {

void collect_locs(const ExprPtr& e, LocSet& out) {
    if (e->kind == Ek::Loc) out.insert(e->ival);
    for (const auto& k : e->kids) collect_locs(k, out);
}

int count_loc(const ExprPtr& e, int64_t l) {
    int n = e->kind == Ek::Loc && e->ival == l ? 1 : 0;
    for (const auto& k : e->kids) n += count_loc(k, l);
    return n;
}

LocSet reach(const Memory& mem, const LocSet& roots) {
    LocSet seen;
    std::deque<int64_t> work(roots.begin(), roots.end());
    while (!work.empty()) {
        int64_t l = work.front();
        work.pop_front();
        if (!mem.contains(l) || !seen.insert(l).second) continue;
        for (const auto& v : mem.at(l).fields)
            if (v.k == Value::Loc) work.push_back(v.i);
    }
    return seen;
}

// Resolves the runtime value of a location-rooted field path against σ.
std::optional<Value> resolve_path(const Program& p, const Memory& mem,
                                  const ExprPtr& e) {
    if (e->kind == Ek::Loc) return Value::loc(e->ival);
    if (e->kind != Ek::FieldAcc) return std::nullopt;
    auto base = resolve_path(p, mem, e->kids[0]);
    if (!base || base->k != Value::Loc || !mem.contains(base->i))
        return std::nullopt;
    const Obj& o = mem.at(base->i);
    const ClassDecl* cd = p.find_class(o.cls);
    if (!cd) return std::nullopt;
    int idx = cd->field_index(e->name);
    if (idx < 0 || static_cast<size_t>(idx) >= o.fields.size())
        return std::nullopt;
    return o.fields[static_cast<size_t>(idx)];
}

std::string resolve_recv_class(const Program& p, const Memory& mem,
                               const ExprPtr& e) {
    auto v = resolve_path(p, mem, e);
    if (!v || v->k != Value::Loc || !mem.contains(v->i)) return "";
    return mem.at(v->i).cls;
}

// Single-pass demanded-modifier analysis: which location occurrences must
// type as mut for the surrounding expression to type at all. Equivalent to
// probing each occurrence at imm (the definitional mutatable); the
// equivalence is property-tested.
struct Demands {
    const Program& prog;
    const Memory& mem;
    LocSet mut_locs;
    LocSet all_locs;
    std::vector<const Expr*> monitors;
    bool fg_ok = true;
    std::string fg_reason;
    std::map<std::string, bool> var_demand;

    struct MonCtx {
        int64_t loc;
        bool in_check;
        int body_count;
    };
    std::vector<MonCtx> mon_stack;

    bool is_list_obj(int64_t l) const {
        return mem.contains(l) && mem.at(l).is_list;
    }

    void visit(const ExprPtr& e, bool want_mut) {
        switch (e->kind) {
            case Ek::Var:
                if (want_mut) var_demand[e->name] = true;
                return;
            case Ek::Loc:
                all_locs.insert(e->ival);
                if (want_mut) mut_locs.insert(e->ival);
                return;
            case Ek::BoolLit:
            case Ek::IntLit:
            case Ek::StrLit:
            case Ek::UnitLit:
            case Ek::Error:
                return;
            case Ek::FieldAcc: {
                check_field_guard(e, want_mut);
                // Mut Field: a mut result forces a mut receiver
                visit(e->kids[0], want_mut);
                return;
            }
            case Ek::FieldUpd: {
                visit(e->kids[0], true);
                bool vd = false;
                std::string cls = resolve_recv_class(prog, mem, e->kids[0]);
                if (const ClassDecl* cd = prog.find_class(cls))
                    if (const FieldDecl* fd = cd->find_field(e->name))
                        vd = fd->type.mdf == Mdf::Mut ||
                             fd->type.mdf == Mdf::Capsule;
                visit(e->kids[1], vd);
                return;
            }
            case Ek::MCall: {
                bool recv_mut = false;
                std::vector<bool> arg_mut(e->kids.size() - 1, false);
                if (e->kids[0]->kind == Ek::Loc && is_list_obj(e->kids[0]->ival)) {
                    const Obj& o = mem.at(e->kids[0]->ival);
                    if (e->name == "add") {
                        recv_mut = true;
                        if (o.list_elem && !arg_mut.empty())
                            arg_mut[0] = o.list_elem->mdf == Mdf::Mut ||
                                         o.list_elem->mdf == Mdf::Capsule;
                    } else if (e->name == "get") {
                        recv_mut = want_mut;  // mut elements need a mut list
                    }
                } else {
                    std::string cls = resolve_recv_class(prog, mem, e->kids[0]);
                    if (const MethodDecl* md = lookup_method(prog, cls, e->name)) {
                        recv_mut = md->receiver == Mdf::Mut ||
                                   md->receiver == Mdf::Capsule;
                        for (size_t i = 0; i < md->params.size() &&
                                           i < arg_mut.size(); ++i)
                            arg_mut[i] = md->params[i].type.mdf == Mdf::Mut ||
                                         md->params[i].type.mdf == Mdf::Capsule;
                    }
                }
                visit(e->kids[0], recv_mut);
                for (size_t i = 1; i < e->kids.size(); ++i)
                    visit(e->kids[i], arg_mut[i - 1]);
                return;
            }
            case Ek::SCall: {
                std::vector<bool> arg_mut(e->kids.size(), false);
                if (e->name.rfind("List", 0) == 0 && e->name2 == "of") {
                    bool m = e->tref && (e->tref->mdf == Mdf::Mut ||
                                         e->tref->mdf == Mdf::Capsule);
                    std::fill(arg_mut.begin(), arg_mut.end(), m);
                } else if (const ClassDecl* cd = prog.find_class(e->name)) {
                    if (const MethodDecl* md = cd->find_method(e->name2))
                        for (size_t i = 0; i < md->params.size() &&
                                           i < arg_mut.size(); ++i)
                            arg_mut[i] = md->params[i].type.mdf == Mdf::Mut ||
                                         md->params[i].type.mdf == Mdf::Capsule;
                }
                for (size_t i = 0; i < e->kids.size(); ++i)
                    visit(e->kids[i], arg_mut[i]);
                return;
            }
            case Ek::New: {
                std::vector<bool> arg_mut(e->kids.size(), false);
                if (const ClassDecl* cd = prog.find_class(e->name)) {
                    for (size_t i = 0; i < cd->fields.size() &&
                                       i < arg_mut.size(); ++i)
                        arg_mut[i] = cd->fields[i].type.mdf == Mdf::Mut ||
                                     cd->fields[i].type.mdf == Mdf::Capsule;
                }
                for (size_t i = 0; i < e->kids.size(); ++i)
                    visit(e->kids[i], arg_mut[i]);
                return;
            }
            case Ek::Monitor: {
                monitors.push_back(e.get());
                mon_stack.push_back(
                    MonCtx{e->ival, false, count_loc(e->kids[0], e->ival)});
                visit(e->kids[0], want_mut);
                mon_stack.back().in_check = true;
                visit(e->kids[1], false);
                mon_stack.pop_back();
                return;
            }
            case Ek::PreCheck: {
                mon_stack.push_back(MonCtx{e->ival, true, 0});
                visit(e->kids[0], false);
                mon_stack.pop_back();
                visit(e->kids[1], want_mut);
                return;
            }
            case Ek::Try:
            case Ek::TryAnn:
                visit(e->kids[0], want_mut);
                visit(e->kids[1], want_mut);
                return;
            case Ek::If:
                visit(e->kids[0], false);
                visit(e->kids[1], want_mut);
                visit(e->kids[2], want_mut);
                return;
            case Ek::Let: {
                visit(e->kids[1], want_mut);
                bool d = false;
                auto it = var_demand.find(e->name);
                if (it != var_demand.end()) d = it->second;
                visit(e->kids[0], d);
                return;
            }
            case Ek::Seq:
                visit(e->kids[0], false);
                visit(e->kids[1], want_mut);
                return;
            case Ek::ForRange:
                visit(e->kids[0], false);
                visit(e->kids[1], false);
                visit(e->kids[2], false);
                return;
            case Ek::ForEachUnit:
            case Ek::ForEachAll: {
                visit(e->kids[1], false);
                bool d = false;
                auto it = var_demand.find(e->name);
                if (it != var_demand.end()) d = it->second;
                visit(e->kids[0], d);
                return;
            }
            case Ek::And:
            case Ek::Or:
            case Ek::Prim:
            case Ek::Throw:
                for (const auto& k : e->kids) visit(k, false);
                return;
        }
    }

    void check_field_guard(const ExprPtr& e, bool want_mut) {
        if (e->kids[0]->kind != Ek::Loc) return;
        int64_t l = e->kids[0]->ival;
        if (!mem.contains(l) || mem.at(l).is_list) return;
        const std::string& cls = mem.at(l).cls;
        const ClassDecl* cd = prog.find_class(cls);
        if (!cd) return;
        const FieldDecl* fd = cd->find_field(e->name);
        if (!fd || fd->type.mdf != Mdf::Capsule) return;
        if (!field_inside_method(prog, cls, "invariant", e->name)) return;
        if (!want_mut) return;  // the access cannot be used as mut
        for (const auto& m : mon_stack) {
            if (m.loc != l) continue;
            if (m.in_check || m.body_count == 1) return;
        }
        fg_ok = false;
        fg_reason = "unguarded mut access to capsule field " + e->name +
                    " of @" + std::to_string(l);
    }
};

}  // namespace

LocSet rog(const Memory& mem, int64_t l) {
    return reach(mem, LocSet{l});
}

LocSet erog(const Program& p, const Memory& mem, int64_t l) {
    LocSet out;
    if (!mem.contains(l)) return out;
    const Obj& o = mem.at(l);
    LocSet roots;
    if (o.is_list) {
        if (o.list_elem && (o.list_elem->mdf == Mdf::Imm ||
                            o.list_elem->mdf == Mdf::Capsule)) {
            for (const auto& v : o.fields)
                if (v.k == Value::Loc) roots.insert(v.i);
        }
    } else if (const ClassDecl* cd = p.find_class(o.cls)) {
        for (size_t i = 0; i < cd->fields.size() && i < o.fields.size(); ++i) {
            Mdf m = cd->fields[i].type.mdf;
            if ((m == Mdf::Imm || m == Mdf::Capsule) &&
                o.fields[i].k == Value::Loc)
                roots.insert(o.fields[i].i);
        }
    }
    return reach(mem, roots);
}

bool mutatable(const Program& p, const Memory& mem, const ExprPtr& e,
               int64_t l) {
    std::vector<const Expr*> occurrences;
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& x) {
        if (x->kind == Ek::Loc && x->ival == l) occurrences.push_back(x.get());
        for (const auto& k : x->kids) scan(k);
    };
    scan(e);
    if (occurrences.empty()) return false;
    std::vector<std::string> classes;
    std::vector<std::shared_ptr<const TypeRef>> elems;
    for (const auto& o : mem.store) {
        classes.push_back(o.cls);
        elems.push_back(o.is_list ? o.list_elem : nullptr);
    }
    for (const Expr* occ : occurrences)
        if (!typecheck_runtime_expr(p, classes, elems, e, occ)) return true;
    return false;
}

bool well_encapsulated(const Program& p, const Memory& mem, const ExprPtr& e,
                       int64_t l) {
    for (int64_t l2 : erog(p, mem, l))
        if (mutatable(p, mem, e, l2)) return false;
    return true;
}

bool monitored(const ExprPtr& e, int64_t l) {
    std::vector<const Expr*> monitors;
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& x) {
        if (x->kind == Ek::Monitor && x->ival == l) monitors.push_back(x.get());
        for (const auto& k : x->kids) scan(k);
    };
    scan(e);
    for (const Expr* m : monitors) {
        const ExprPtr& body = m->kids[0];
        if (body->kind == Ek::Loc && body->ival == l) return true;
        if (count_loc(body, l) == 0) return true;
    }
    return false;
}

bool valid(const Program& p, const Memory& mem, int64_t l, uint64_t fuel) {
    if (!mem.contains(l)) return false;
    const Obj& o = mem.at(l);
    if (o.is_list) return true;  // built-in objects are trivially valid
    const ClassDecl* cd = p.find_class(o.cls);
    if (!cd) return false;
    Machine m(p, ProtocolMode{ProtocolKind::Paper, false});
    m.cfg.mem = mem;
    m.cfg.mem.output_log.clear();
    auto call = make_expr(Ek::MCall);
    call->name = "invariant";
    call->kids = {expr_loc(l)};
    m.cfg.expr = call;
    m.cfg.steps = 0;
    RunResult r = m.run(fuel);
    if (r.outcome != RunResult::Value || r.value.k != Value::Bool ||
        r.value.i != 1)
        return false;
    // pre-existing memory must be preserved bit-identically
    if (r.mem.size() < mem.size()) return false;
    for (size_t i = 0; i < mem.size(); ++i) {
        const Obj& a = mem.store[i];
        const Obj& b = r.mem.store[i];
        if (a.cls != b.cls || a.fields.size() != b.fields.size()) return false;
        for (size_t j = 0; j < a.fields.size(); ++j)
            if (a.fields[j] != b.fields[j]) return false;
    }
    return true;
}

bool garbage(const Memory& mem, const ExprPtr& e, int64_t l) {
    LocSet roots;
    collect_locs(e, roots);
    return reach(mem, roots).count(l) == 0;
}

bool trusted(const std::vector<CtxFrame>& ctx, const ExprPtr& redex,
             int64_t l) {
    if (redex->kind == Ek::MCall && redex->name == "invariant" &&
        redex->kids.size() == 1 && redex->kids[0]->kind == Ek::Loc &&
        redex->kids[0]->ival == l) {
        // the generated call itself: the hole is the whole check slot
        if (!ctx.empty()) {
            const CtxFrame& fr = ctx.back();
            if (fr.node->kind == Ek::Monitor && fr.child == 1 &&
                fr.node->ival == l)
                return true;
            if (fr.node->kind == Ek::PreCheck && fr.child == 0 &&
                fr.node->ival == l)
                return true;
        }
        return false;
    }
    if (redex->kind == Ek::FieldAcc && redex->kids[0]->kind == Ek::Loc &&
        redex->kids[0]->ival == l) {
        for (const auto& fr : ctx) {
            if (fr.node->kind == Ek::Monitor && fr.child == 1 &&
                fr.node->ival == l)
                return true;
            if (fr.node->kind == Ek::PreCheck && fr.child == 0 &&
                fr.node->ival == l)
                return true;
        }
    }
    return false;
}

bool field_guarded(const Program& p, const Memory& mem, const ExprPtr& e) {
    Demands d{p, mem};
    d.visit(e, false);
    return d.fg_ok;
}

LocSet demanded_mut_locs(const Program& p, const Memory& mem,
                         const ExprPtr& e) {
    Demands d{p, mem};
    d.visit(e, false);
    return d.mut_locs;
}

void OracleChecker::refresh(const Memory& mem) {
    if (mem.version == mem_version_) return;
    mem_version_ = mem.version;
    valid_cache_.clear();
    erog_cache_.clear();
}

bool OracleChecker::cached_valid(const Memory& mem, int64_t l) {
    auto it = valid_cache_.find(l);
    if (it != valid_cache_.end()) return it->second;
    ++validity_probes;
    bool v = valid(prog_, mem, l);
    valid_cache_[l] = v;
    return v;
}

const LocSet& OracleChecker::cached_erog(const Memory& mem, int64_t l) {
    auto it = erog_cache_.find(l);
    if (it != erog_cache_.end()) return it->second;
    return erog_cache_[l] = erog(prog_, mem, l);
}

OkVerdict OracleChecker::assert_ok(const Config& cfg) {
    refresh(cfg.mem);
    OkVerdict verdict;
    Demands d{prog_, cfg.mem};
    d.visit(cfg.expr, false);
    LocSet reachable = reach(cfg.mem, d.all_locs);

    auto is_monitored = [&](int64_t l) {
        for (const Expr* m : d.monitors) {
            if (m->ival != l) continue;
            const ExprPtr& body = m->kids[0];
            if (body->kind == Ek::Loc && body->ival == l) return true;
            if (count_loc(body, l) == 0) return true;
        }
        return false;
    };

    for (int64_t l = 0; l < static_cast<int64_t>(cfg.mem.size()); ++l) {
        if (reachable.count(l) == 0) {
            verdict.per_loc[l] = OkClass::Garbage;
            continue;
        }
        if (is_monitored(l)) {
            verdict.per_loc[l] = OkClass::Monitored;
            continue;
        }
        bool v = cached_valid(cfg.mem, l);
        bool enc = true;
        for (int64_t l2 : cached_erog(cfg.mem, l)) {
            if (d.mut_locs.count(l2)) {
                enc = false;
                break;
            }
        }
        if (v && enc) {
            verdict.per_loc[l] = OkClass::ValidAndEncapsulated;
        } else {
            verdict.per_loc[l] = OkClass::Violation;
            verdict.violations.push_back(OkViolation{
                l, std::string("@") + std::to_string(l) +
                       " is reachable, unmonitored and " +
                       (v ? "not well-encapsulated" : "not valid")});
        }
    }

    // the soundness statement on the current redex
    Decomp dec = decompose(cfg.expr);
    if (dec.cls == Decomp::Redex &&
        (dec.redex->kind == Ek::MCall || dec.redex->kind == Ek::FieldAcc ||
         dec.redex->kind == Ek::FieldUpd || dec.redex->kind == Ek::New)) {
        LocSet in_redex;
        for (const auto& k : dec.redex->kids)
            if (k->kind == Ek::Loc) in_redex.insert(k->ival);
        for (int64_t l : in_redex) {
            if (trusted(dec.path, dec.redex, l)) continue;
            if (cached_valid(cfg.mem, l)) continue;
            verdict.violations.push_back(OkViolation{
                l, "@" + std::to_string(l) +
                       " occurs in an untrusted redex but is not valid"});
        }
    }
    return verdict;
}

OkVerdict OracleChecker::assert_ok_full(const Config& cfg) {
    OkVerdict verdict = assert_ok(cfg);
    Demands d{prog_, cfg.mem};
    d.visit(cfg.expr, false);
    if (!d.fg_ok)
        verdict.violations.push_back(OkViolation{-1, d.fg_reason});
    // monitor well-formedness: locations preserved by a try are never
    // monitored inside it
    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
        if (e->kind == Ek::TryAnn && e->snapshot) {
            size_t dom = e->snapshot->store.size();
            std::function<void(const ExprPtr&)> inner = [&](const ExprPtr& x) {
                if (x->kind == Ek::Monitor &&
                    static_cast<size_t>(x->ival) < dom)
                    verdict.violations.push_back(OkViolation{
                        x->ival, "monitored location @" +
                                     std::to_string(x->ival) +
                                     " is preserved by an enclosing try"});
                for (const auto& k : x->kids) inner(k);
            };
            inner(e->kids[0]);
        }
        for (const auto& k : e->kids) scan(k);
    };
    scan(cfg.expr);
    return verdict;
}

OkVerdict assert_ok(const Program& p, const Config& cfg) {
    OracleChecker c(p);
    return c.assert_ok(cfg);
}

}  // namespace ivl
