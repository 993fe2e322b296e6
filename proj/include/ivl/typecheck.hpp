// Type-modifier checker: modifier subtyping and viewpoint adaptation,
// promotion of mut expressions to capsule/imm, strong-exception-safety
// masking inside try blocks, affine capsule locals, object-capability call
// restrictions, and purity classification.
//
// The checker is deliberately conservative: it accepts the positive corpus
// and rejects the negative one, but does not attempt full recovery/promotion
// generality.
//
// Diagnostic rule ids:
//   mut-through-read, read-to-mut, capsule-reuse, capability-call-outside,
//   modifier-mismatch, unknown-name, ses-mut-capture, promotion-failed,
//   throw-not-imm, type-mismatch, arity-mismatch, unknown-method,
//   unknown-class, abstract-instantiation, iface-signature-mismatch,
//   iface-missing-method.

#ifndef IVL_TYPECHECK_HPP
#define IVL_TYPECHECK_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ivl/ast.hpp"
#include "ivl/diagnostics.hpp"

namespace ivl {

struct VarBinding {
    TypeRef type;
    bool masked = false;    // mut seen as read inside an enclosing try
    bool consumed = false;  // affine capsule local already used
};

/// Γ plus the SES masking state. Σ for runtime expressions is passed
/// separately (see typecheck_runtime_expr).
struct TypeEnv {
    std::map<std::string, VarBinding> vars;
};

struct MethodContext {
    std::string enclosing_class;  // empty for the main expression
    Mdf receiver = Mdf::Read;
    bool is_static = false;
    bool is_capability_context = false;
    bool in_capsule_mutator = false;
    bool in_invariant = false;
};

struct TypeckResult {
    std::vector<Diagnostic> diagnostics;
    Program program;  // elaborated copy (scalar calls lowered to prims)
    bool ok() const { return !has_errors(diagnostics); }
};

/// Checks and elaborates a parsed program.
TypeckResult typecheck_program(const Program& p);

/// Expression-level interface used by unit tests. Elaborates a copy of e;
/// diagnostics are appended. Returns nullopt if the expression is ill-typed.
std::optional<TypeRef> typecheck_expr(const Program& p, TypeEnv& env,
                                      const MethodContext& ctx,
                                      const ExprPtr& e,
                                      std::vector<Diagnostic>& diags,
                                      ExprPtr* elaborated = nullptr);

/// Promotion: e must typecheck with modifier mut; succeeds when no free
/// variable of e declared outside it is mut (and none is read when the
/// target is capsule or imm). capsule implicitly converts to imm.
std::optional<TypeRef> try_promote(const Program& p, TypeEnv& env,
                                   const MethodContext& ctx, const ExprPtr& e,
                                   Mdf target, std::vector<Diagnostic>& diags);

/// TMs and OCs guarantee purity of any method whose receiver and parameters
/// are all read or imm.
bool is_pure_method(const Program& p, const std::string& cls,
                    const std::string& m);

/// Viewpoint adaptation for field access: imm fields stay imm, everything
/// seen through an imm receiver is imm, mut fields through read receivers
/// become read, and capsule fields read as read outside capsule mutators.
Mdf viewpoint_adapt(Mdf receiver, Mdf field);

/// Runtime-form typing for the soundness oracle. Locations type flexibly
/// (any modifier of their Σ class) except `probe`, which is forced imm.
/// Returns nullopt when ill-typed under that constraint.
std::optional<TypeRef> typecheck_runtime_expr(
    const Program& p, const std::vector<std::string>& sigma_classes,
    const std::vector<std::shared_ptr<const TypeRef>>& sigma_list_elems,
    const ExprPtr& e, const Expr* probe);

}  // namespace ivl

#endif
