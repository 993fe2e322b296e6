// The small-step abstract machine: evaluation-context decomposition, the
// reduction rules, monitor injection and error propagation, parameterized
// by a protocol mode.

#ifndef IVL_INTERP_HPP
#define IVL_INTERP_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ivl/ast.hpp"
#include "ivl/memory.hpp"
#include "ivl/protocols.hpp"

namespace ivl {

/// One frame of the evaluation context: the node and which child the hole
/// sits in.
struct CtxFrame {
    ExprPtr node;
    int child = 0;
};

/// Result of decomposing a configuration expression.
struct Decomp {
    enum Cls { Value, Err, Redex } cls = Value;
    std::vector<CtxFrame> path;  // outermost first
    ExprPtr redex;               // set when cls == Redex
};

/// Unique decomposition of a closed expression: value, error (an error atom
/// with no enclosing annotated try), or context plus redex. Monitor bodies
/// evaluate before their checks. Throws InterpPanic when stuck.
Decomp decompose(const ExprPtr& e);

/// An in-flight invariant check: the monitor (or pre-check) whose check
/// slot the current redex sits in.
struct CheckFrame {
    int64_t loc = 0;
    CheckSite site = CheckSite::Ctor;
    std::string cls;
    uint64_t substeps = 0;       // steps spent inside this check
    size_t alloc_watermark = 0;  // σ size when the check started
};

struct Config {
    Memory mem;
    ExprPtr expr;
    uint64_t steps = 0;
    CheckCounters checks;
    std::vector<CheckFrame> check_stack;  // outermost first
};

struct RunResult {
    enum Outcome { Value, Error, FuelExhausted } outcome = Value;
    ivl::Value value;  // set when outcome == Value
    Memory mem;
    CheckCounters checks;
    uint64_t steps = 0;
};

constexpr uint64_t kDefaultFuel = 10'000'000;
constexpr uint64_t kCheckFuel = 1'000'000;

/// Owns one execution. The program must have passed wf-check and
/// tm-typecheck (the machine assumes elaborated expressions).
class Machine {
  public:
    Machine(const Program& prog, ProtocolMode mode);

    /// Installs the initial configuration {c ↦ Cap} | main.
    void reset();

    /// Applies exactly one reduction. Returns the rule name, or nullopt when
    /// the configuration is terminal (value or error).
    std::optional<std::string> step();

    bool at_value() const;
    bool at_error() const;
    ivl::Value result_value() const;

    RunResult run(uint64_t fuel = kDefaultFuel);

    Config cfg;
    const Program& program() const { return prog_; }
    ProtocolMode mode() const { return mode_; }

    /// Invoked right after a check completes (true or false), before the
    /// counter is bumped; used by tests to cross-reference the trace.
    std::function<void(const CheckFrame&, bool passed)> on_check_complete;

    /// Invoked after each mcall redex on a pure method, with the memory
    /// before and after the full evaluation unavailable at this level; the
    /// purity smoke test drives the machine manually instead.
    uint64_t check_fuel = kCheckFuel;

  private:
    const Program& prog_;
    ProtocolMode mode_;

    ExprPtr invariant_call(int64_t l) const;
    bool suppressed(int64_t l) const;
    void sync_check_stack(const std::vector<CtxFrame>& path, bool count_pops);
    ExprPtr apply_redex(const Decomp& d, std::string& rule);
    ExprPtr apply_mcall(const ExprPtr& r, std::string& rule);
    ExprPtr apply_list_native(const ExprPtr& r, int64_t l, std::string& rule);
    ExprPtr apply_prim(const ExprPtr& r, std::string& rule);
};

/// Convenience wrapper: parse → check callers should use run_program in
/// corpus.hpp; this runs an already-elaborated program.
RunResult run(const Program& prog, ProtocolMode mode,
              uint64_t fuel = kDefaultFuel);

/// Renders one trace line: step index, rule, redex, counter delta.
std::string trace_line(uint64_t step, const std::string& rule,
                       const ExprPtr& redex, uint64_t delta);

}  // namespace ivl

#endif
