// Test-side oracles shared by the unit and acceptance suites: the axioms
// checked per step along traces (Head Not Circular, Capsule Tree, SES
// memory restoration) and a trace driver that cross-references counter
// increments with their reduction rules.

#ifndef IVL_TESTS_TRACE_AXIOMS_HPP
#define IVL_TESTS_TRACE_AXIOMS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ivl/interp.hpp"
#include "ivl/oracle.hpp"

namespace ivl_tests {

using namespace ivl;

// An object is not part of the ROG of its immutable or capsule fields.
inline bool head_not_circular(const Program& p, const Memory& mem) {
    for (int64_t l = 0; l < static_cast<int64_t>(mem.size()); ++l)
        if (erog(p, mem, l).count(l)) return false;
    return true;
}

inline LocSet erog_without(const Program& p, const Memory& mem, int64_t skip,
                           int64_t l0) {
    if (l0 == skip || !mem.contains(l0)) return {};
    // erog roots of l0, then reachability that never passes through skip
    LocSet roots;
    const Obj& o = mem.at(l0);
    if (o.is_list) {
        if (o.list_elem && (o.list_elem->mdf == Mdf::Imm ||
                            o.list_elem->mdf == Mdf::Capsule))
            for (const auto& v : o.fields)
                if (v.k == Value::Loc) roots.insert(v.i);
    } else if (const ClassDecl* cd = p.find_class(o.cls)) {
        for (size_t i = 0; i < cd->fields.size() && i < o.fields.size(); ++i) {
            Mdf m = cd->fields[i].type.mdf;
            if ((m == Mdf::Imm || m == Mdf::Capsule) &&
                o.fields[i].k == Value::Loc)
                roots.insert(o.fields[i].i);
        }
    }
    LocSet seen;
    std::vector<int64_t> work(roots.begin(), roots.end());
    while (!work.empty()) {
        int64_t l = work.back();
        work.pop_back();
        if (l == skip || !mem.contains(l) || !seen.insert(l).second) continue;
        for (const auto& v : mem.at(l).fields)
            if (v.k == Value::Loc) work.push_back(v.i);
    }
    return seen;
}

// Capsule Tree: if mutatable l2 is in erog(l1) and l1 in erog(l0), removing
// l1 disconnects l0 from l2. Brute force; `mut_locs` caller-provided (the
// demanded-modifier set, property-tested equal to the definitional route).
inline bool capsule_tree_ok(const Program& p, const Memory& mem,
                            const LocSet& mut_locs, std::string* why) {
    size_t n = mem.size();
    std::vector<LocSet> erogs(n);
    for (size_t l = 0; l < n; ++l)
        erogs[l] = erog(p, mem, static_cast<int64_t>(l));
    for (size_t l1 = 0; l1 < n; ++l1) {
        for (int64_t l2 : erogs[l1]) {
            if (!mut_locs.count(l2)) continue;
            for (size_t l0 = 0; l0 < n; ++l0) {
                if (!erogs[l0].count(static_cast<int64_t>(l1))) continue;
                if (erog_without(p, mem, static_cast<int64_t>(l1),
                                 static_cast<int64_t>(l0))
                        .count(l2)) {
                    if (why)
                        *why = "capsule tree: @" + std::to_string(l2) +
                               " still reachable from @" + std::to_string(l0) +
                               " without @" + std::to_string(l1);
                    return false;
                }
            }
        }
    }
    return true;
}

struct TraceStats {
    uint64_t steps = 0;
    uint64_t violations = 0;
    uint64_t try_errors = 0;
    uint64_t checks_seen = 0;      // via the completion hook
    uint64_t bad_check_sites = 0;  // completions at sites illegal for paper
    uint64_t redex_validity_failures = 0;
    uint64_t axiom_failures = 0;
    std::string first_problem;
    RunResult::Outcome outcome = RunResult::Value;
};

struct TraceOptions {
    uint64_t max_steps = kDefaultFuel;
    uint64_t sample_every = 1;  // oracle sampling period
    bool check_ok = true;
    bool check_axioms = false;      // HNC + Capsule Tree (heaps <= 64)
    bool check_ses_restore = true;  // try-error restores the snapshot
    bool check_injection_sites = false;
    bool check_redex_validity = false;
};

// Runs one program in paper mode under per-step scrutiny.
inline TraceStats scrutinize(const Program& prog, const TraceOptions& opt) {
    TraceStats st;
    Machine m(prog, ProtocolMode{ProtocolKind::Paper, false});
    OracleChecker oc(prog);
    auto note = [&](const std::string& s) {
        if (st.first_problem.empty())
            st.first_problem = "step " + std::to_string(m.cfg.steps) + ": " + s;
    };
    m.on_check_complete = [&](const CheckFrame& f, bool) {
        ++st.checks_seen;
        if (opt.check_injection_sites) {
            bool legal = f.site == CheckSite::Ctor ||
                         f.site == CheckSite::FieldUpdate ||
                         f.site == CheckSite::CapsuleMutatorExit;
            const ClassDecl* cd = prog.find_class(f.cls);
            if (!legal || !cd || !cd->has_declared_invariant()) {
                ++st.bad_check_sites;
                note("check completion at illegal site for class " + f.cls);
            }
        }
    };
    // try-enter snapshots for SES restoration checks, keyed by depth
    std::vector<std::shared_ptr<const MemSnapshot>> pending;
    for (;;) {
        if (m.cfg.steps >= opt.max_steps) {
            st.outcome = RunResult::FuelExhausted;
            break;
        }
        bool sampled = (m.cfg.steps % opt.sample_every) == 0;
        if (sampled && opt.check_ok) {
            OkVerdict v = oc.assert_ok_full(m.cfg);
            if (!v.ok()) {
                st.violations += v.violations.size();
                note(v.violations.front().reason);
            }
        }
        if (sampled && opt.check_redex_validity) {
            Decomp d = decompose(m.cfg.expr);
            if (d.cls == Decomp::Redex &&
                (d.redex->kind == Ek::MCall || d.redex->kind == Ek::FieldAcc ||
                 d.redex->kind == Ek::FieldUpd || d.redex->kind == Ek::New)) {
                for (const auto& k : d.redex->kids) {
                    if (k->kind != Ek::Loc) continue;
                    if (trusted(d.path, d.redex, k->ival)) continue;
                    if (!valid(prog, m.cfg.mem, k->ival)) {
                        ++st.redex_validity_failures;
                        note("untrusted redex holds invalid @" +
                             std::to_string(k->ival));
                    }
                }
            }
        }
        if (sampled && opt.check_axioms && m.cfg.mem.size() <= 64) {
            if (!head_not_circular(prog, m.cfg.mem)) {
                ++st.axiom_failures;
                note("head-not-circular failed");
            }
            LocSet muts = demanded_mut_locs(prog, m.cfg.mem, m.cfg.expr);
            std::string why;
            if (!capsule_tree_ok(prog, m.cfg.mem, muts, &why)) {
                ++st.axiom_failures;
                note(why);
            }
        }
        auto rule = m.step();
        if (!rule) {
            st.outcome = m.at_error() ? RunResult::Error : RunResult::Value;
            break;
        }
        if (opt.check_ses_restore) {
            if (*rule == "try-enter") {
                pending.push_back(m.cfg.mem.snapshot());
            } else if (*rule == "try-ok") {
                if (!pending.empty()) pending.pop_back();
            } else if (*rule == "try-error") {
                ++st.try_errors;
                if (!pending.empty()) {
                    const auto& snap = *pending.back();
                    bool same = m.cfg.mem.size() == snap.store.size();
                    for (size_t i = 0; same && i < snap.store.size(); ++i) {
                        const Obj& a = m.cfg.mem.store[i];
                        const Obj& b = snap.store[i];
                        same = a.cls == b.cls &&
                               a.fields.size() == b.fields.size();
                        for (size_t j = 0; same && j < a.fields.size(); ++j)
                            same = a.fields[j] == b.fields[j];
                    }
                    if (!same) {
                        ++st.axiom_failures;
                        note("try-error did not restore the pre-try memory");
                    }
                    pending.pop_back();
                }
            }
        }
    }
    st.steps = m.cfg.steps;
    return st;
}

}  // namespace ivl_tests

#endif
