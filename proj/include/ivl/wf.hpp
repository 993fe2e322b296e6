// Well-formedness pass: invariant-method restrictions, capsule-mutator
// restrictions, receiver forms, Cap rules, and class-table sanity.
//
// Diagnostic rule ids:
//   inv-receiver-not-read, inv-has-params, inv-return-not-bool,
//   inv-this-misuse, inv-helper-recursion,
//   cm-this-once, cm-param-modifier, cm-mut-return, cm-throws-nonempty,
//   fields-instance-private,
//   cap-no-new, cap-mut-receiver, cap-mut-fields-only,
//   cap-field-uninitializable, cap-invariant-not-true,
//   unknown-interface, implements-non-interface, unknown-class,
//   field-modifier-read, reserved-class-name.

#ifndef IVL_WF_HPP
#define IVL_WF_HPP

#include <vector>

#include "ivl/ast.hpp"
#include "ivl/diagnostics.hpp"

namespace ivl {

/// invariant methods: read receiver, no parameters, imm Bool return, and
/// `this` used only to read imm/capsule fields or to call inlinable helper
/// methods (helper chains are inlined to depth 32; recursion is rejected).
std::vector<Diagnostic> check_invariant_method(const Program& p,
                                               const ClassDecl& c);

/// capsule mutators: `this` exactly once, no mut/read parameters, non-mut
/// return type, empty throws clause.
std::vector<Diagnostic> check_capsule_mutators(const Program& p,
                                               const ClassDecl& c);

/// Field accesses/updates must sit on this-rooted paths in method bodies
/// (local-rooted in the main expression); foreach variables bound over such
/// paths root paths themselves.
std::vector<Diagnostic> check_receiver_forms(const Program& p);

/// Cap: no `new Cap`, mut receivers only, mut List fields only, invariant
/// literally true.
std::vector<Diagnostic> check_cap_rules(const Program& p);

/// Runs every pass plus table-level checks; diagnostics are order-stable.
std::vector<Diagnostic> wf_check_program(const Program& p);

}  // namespace ivl

#endif
