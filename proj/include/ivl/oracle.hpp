// Executable forms of the predicates behind the soundness argument: rog,
// erog, mutatable, wellEncapsulated, monitored, valid, garbage, trusted and
// fieldGuarded, plus a per-step OK checker.
//
// mutatable is implemented by re-typing each occurrence of the location at
// imm (the definitional route); OracleChecker's per-step scan uses an
// equivalent single-pass demanded-modifier analysis, cross-checked against
// the definitional route by property tests.

#ifndef IVL_ORACLE_HPP
#define IVL_ORACLE_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ivl/ast.hpp"
#include "ivl/interp.hpp"
#include "ivl/memory.hpp"

namespace ivl {

using LocSet = std::set<int64_t>;

/// Reachable object graph: transitive closure over all fields.
LocSet rog(const Memory& mem, int64_t l);

/// Encapsulated ROG: union of the ROGs of l's imm and capsule fields
/// (elements, for built-in lists).
LocSet erog(const Program& p, const Memory& mem, int64_t l);

/// Some occurrence of l in e, re-typed at imm, makes e ill-typed.
bool mutatable(const Program& p, const Memory& mem, const ExprPtr& e,
               int64_t l);

/// No location in erog(σ, l) is mutatable in e.
bool well_encapsulated(const Program& p, const Memory& mem, const ExprPtr& e,
                       int64_t l);

/// Execution is inside a monitor for l whose body is l itself or no longer
/// contains l.
bool monitored(const ExprPtr& e, int64_t l);

/// l.invariant() deterministically reduces to true within fuel, preserving
/// the pre-existing memory. Built-in objects (lists) are trivially valid.
bool valid(const Program& p, const Memory& mem, int64_t l,
           uint64_t fuel = kCheckFuel);

/// l is unreachable from the locations of e.
bool garbage(const Memory& mem, const ExprPtr& e, int64_t l);

/// The current step is a runtime-generated invariant call on l, or a field
/// access on l inside the evaluation of its check.
bool trusted(const std::vector<CtxFrame>& ctx, const ExprPtr& redex,
             int64_t l);

/// Every mut access to a capsule field mentioned in its class's invariant is
/// individually guarded by a monitor on the receiver.
bool field_guarded(const Program& p, const Memory& mem, const ExprPtr& e);

/// The locations whose occurrences in e are demanded mut by their context;
/// the fast equivalent of probing each occurrence with `mutatable`.
LocSet demanded_mut_locs(const Program& p, const Memory& mem,
                         const ExprPtr& e);

enum class OkClass { Garbage, ValidAndEncapsulated, Monitored, Violation };

struct OkViolation {
    int64_t loc;
    std::string reason;
};

struct OkVerdict {
    std::map<int64_t, OkClass> per_loc;
    std::vector<OkViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Per-step soundness scan with caching across steps of one execution.
/// assert_ok classifies every location per the OK definition and checks the
/// soundness statement on the current redex.
class OracleChecker {
  public:
    explicit OracleChecker(const Program& p) : prog_(p) {}

    OkVerdict assert_ok(const Config& cfg);

    /// Additionally verifies the per-step machine invariants: monitor
    /// well-formedness w.r.t. annotated tries and fieldGuarded.
    OkVerdict assert_ok_full(const Config& cfg);

    uint64_t validity_probes = 0;  // observability for tests

  private:
    const Program& prog_;
    uint64_t mem_version_ = ~0ull;
    std::map<int64_t, bool> valid_cache_;
    std::map<int64_t, LocSet> erog_cache_;
    void refresh(const Memory& mem);
    bool cached_valid(const Memory& mem, int64_t l);
    const LocSet& cached_erog(const Memory& mem, int64_t l);
};

/// One-shot verdict without cross-step caching.
OkVerdict assert_ok(const Program& p, const Config& cfg);

}  // namespace ivl

#endif
