// Abstract syntax for the ivl language: type modifiers, class tables,
// surface and runtime expressions.
//
// Surface programs are produced by the parser; the typechecker elaborates
// them (scalar method calls become primitive ops) before the interpreter
// ever sees them. Runtime-only forms (locations, monitors, annotated try)
// are created by the reduction rules, never by the parser.

#ifndef IVL_AST_HPP
#define IVL_AST_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ivl {

struct Span {
    int line = 0;
    int col = 0;
};

/// Reference modifier. Default in surface syntax is `imm`.
enum class Mdf { Mut, Imm, Capsule, Read };

const char* mdf_name(Mdf m);

/// `mdf C`. For the built-in List the element type is carried along and the
/// class name is the mangled instantiation (e.g. "List<mut Person>").
struct TypeRef {
    Mdf mdf = Mdf::Imm;
    std::string cls;
    std::shared_ptr<TypeRef> elem;  // set iff cls is a List instantiation

    bool is_list() const { return elem != nullptr; }
    std::string str() const;
};

bool same_type(const TypeRef& a, const TypeRef& b);

/// Built-in scalar carriers. These are value types, not heap classes.
bool is_scalar_class(const std::string& cls);

enum class PrimOp {
    Add, Sub, Mul, Div, Mod,
    Eq, Ne, Lt, Le, Gt, Ge,
    Not, Neg,
    Concat, IsEmpty,
    RefEq, RefNe,
    Print,
};

const char* prim_name(PrimOp op);

enum class Ek {
    Var, Loc,
    BoolLit, IntLit, StrLit, UnitLit,
    MCall,     // name = method, kids = {recv, args...}, flag = qualified
    SCall,     // name = class, name2 = method, kids = args
    FieldAcc,  // name = field, kids = {recv}
    FieldUpd,  // name = field, kids = {recv, value}
    New,       // name = class, kids = args
    Try,       // kids = {body, catch}
    TryAnn,    // kids = {body, catch}, snapshot set
    Monitor,   // ival = loc, kids = {body, check}, msite set
    PreCheck,  // ival = loc, kids = {check, pending}
    Prim,      // prim set, kids = operands (Print: {recv, arg})
    And, Or,   // short-circuit, kids = {lhs, rhs}
    If,        // kids = {cond, then, else}
    Let,       // name = var, kids = {init, body}
    Seq,       // kids = {e1, e2}
    ForRange,  // name = var, kids = {lo, hi, bodyTemplate}
    ForEachUnit,  // name = var, ival = next index, kids = {list, bodyTemplate}
    ForEachAll,   // name = var, ival = next index, kids = {list, predTemplate}
    Throw,     // kids = {payload}
    Error,     // sval = message
};

/// Where a monitor came from; drives check accounting.
enum class MonSite { Update, NewObj, CapsuleMutator, VsExit };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct MemSnapshot;  // defined in memory.hpp

struct Expr {
    Ek kind;
    Span span;
    std::string name;
    std::string name2;
    std::string sval;
    int64_t ival = 0;
    bool flag = false;  // MCall: qualified at the original call site
    PrimOp prim = PrimOp::Add;
    MonSite msite = MonSite::Update;
    std::vector<ExprPtr> kids;
    std::shared_ptr<const TypeRef> tref;  // Let/ForEach declared type
    std::shared_ptr<const MemSnapshot> snapshot;  // TryAnn only
};

std::shared_ptr<Expr> make_expr(Ek k, Span sp = {});
ExprPtr expr_var(const std::string& n, Span sp = {});
ExprPtr expr_loc(int64_t l);
ExprPtr expr_bool(bool b);
ExprPtr expr_int(int64_t v);
ExprPtr expr_str(const std::string& s);
ExprPtr expr_unit();

bool is_value(const Expr& e);
/// Error atoms: Error nodes, false-check monitors, false prechecks.
bool is_error_atom(const Expr& e);

/// Capture-avoiding substitution of variables by closed expressions
/// (values in practice). Binders: Let, ForRange, ForEachUnit, ForEachAll.
ExprPtr substitute(const ExprPtr& e,
                   const std::map<std::string, ExprPtr>& bindings);

/// Collects free variables of a (surface or runtime) expression.
void free_vars(const ExprPtr& e, std::vector<std::string>& out);

struct FieldDecl {
    TypeRef type;
    std::string name;
    Span span;
};

struct Param {
    TypeRef type;
    std::string name;
};

struct MethodDecl {
    Mdf receiver = Mdf::Read;
    bool is_static = false;
    TypeRef ret;
    std::string name;
    std::vector<Param> params;
    ExprPtr body;  // null for abstract methods
    bool is_capability = false;
    bool synthesized = false;
    bool declares_throws = false;  // nonempty `throws` marker
    Span span;
};

enum class ClassKind { Class, Interface };

struct ClassDecl {
    std::string name;
    ClassKind kind = ClassKind::Class;
    std::vector<std::string> implements;
    std::vector<FieldDecl> fields;
    std::vector<MethodDecl> methods;
    bool is_capability = false;
    bool uniform_access = false;  // Eiffel-style field-backed getter classes
    bool has_explicit_ctor = false;
    Span span;

    const MethodDecl* find_method(const std::string& m) const;
    const FieldDecl* find_field(const std::string& f) const;
    int field_index(const std::string& f) const;
    /// True when the class carries a user-written, non-trivial invariant.
    bool has_declared_invariant() const;
};

struct Program {
    std::map<std::string, ClassDecl> classes;
    ExprPtr main;

    const ClassDecl* find_class(const std::string& c) const;
    bool is_interface(const std::string& c) const;
    /// Does `cls` implement `iface` (directly or transitively)?
    bool implements(const std::string& cls, const std::string& iface) const;
};

/// Method lookup: local methods for classes, inherited abstract signatures
/// for interfaces. Returns nullptr when unknown. Built-in List lookups are
/// handled separately (see native_list_method in typecheck.cpp).
const MethodDecl* lookup_method(const Program& p, const std::string& cls,
                                const std::string& m);

/// `f inside C.m`: the body of C.m contains the subexpression this.f,
/// in any full context.
bool field_inside_method(const Program& p, const std::string& cls,
                         const std::string& m, const std::string& f);

/// A method m of class C is a capsule mutator iff m is mut, some capsule
/// field f is inside m, and f is inside C.invariant.
bool is_capsule_mutator(const Program& p, const ClassDecl& c,
                        const MethodDecl& m);

}  // namespace ivl

#endif
