// Invariant-check placement strategies: the monitor-based protocol
// (checks after field updates, news, and capsule mutator exits) versus the
// visible-state protocols of D (entry/exit of every public method call on a
// class with a declared invariant) and Eiffel (the same, restricted to
// qualified calls and skipping field-backed methods of uniform-access
// classes).

#ifndef IVL_PROTOCOLS_HPP
#define IVL_PROTOCOLS_HPP

#include <cstdint>
#include <map>
#include <string>

#include "ivl/ast.hpp"

namespace ivl {

enum class ProtocolKind { Paper, DVisibleState, EiffelVisibleState };

struct ProtocolMode {
    ProtocolKind kind = ProtocolKind::Paper;
    /// When set, failed checks are counted and execution continues as if
    /// they had passed.
    bool count_only = false;
};

const char* protocol_name(ProtocolKind k);
ProtocolKind protocol_from_name(const std::string& s);  // throws on unknown

enum class CheckSite {
    Ctor,
    FieldUpdate,
    CapsuleMutatorExit,
    MethodEntry,
    MethodExit,
};

const char* check_site_name(CheckSite s);

struct CheckCounters {
    uint64_t total = 0;
    std::map<std::string, uint64_t> per_class;
    std::map<CheckSite, uint64_t> per_site;

    void bump(const std::string& cls, CheckSite site) {
        ++total;
        ++per_class[cls];
        ++per_site[site];
    }
};

/// Instrumentation event, reported by the interpreter at the corresponding
/// reduction. `qualified` is true when the original call-site receiver
/// expression was not `this`.
struct CheckEvent {
    enum K {
        CtorExit,
        FieldUpdate,
        McallEntry,
        McallExit,
        CapsuleMutatorExit,
    } kind = CtorExit;
    std::string cls;
    std::string method;
    bool qualified = true;
};

/// True iff the method body is exactly `this.f` for some field f and the
/// class is annotated uniform-access.
bool classify_field_backed(const Program& p, const std::string& cls,
                           const std::string& method);

/// Pure placement policy: should an invariant check fire for this event?
/// Synthesized (and Cap) invariants never fire. Re-entrancy suppression for
/// receivers whose invariant evaluation is in flight is applied by the
/// interpreter on top of this predicate.
bool check_events(const Program& p, const ProtocolMode& mode,
                  const CheckEvent& ev);

}  // namespace ivl

#endif
