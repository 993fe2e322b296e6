// Well-typed random program generation for differential soundness testing:
// small class tables with declared invariants over imm/capsule state, mains
// built from news, calls, updates and try/catch, rejection-sampled until
// they pass wf-check and the typechecker.

#ifndef IVL_FUZZ_HPP
#define IVL_FUZZ_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ivl/ast.hpp"

namespace ivl {

struct FuzzCase {
    std::string source;
    Program program;  // elaborated, ready to run
};

struct GenerationExhausted : std::runtime_error {
    explicit GenerationExhausted(const std::string& m)
        : std::runtime_error(m) {}
};

/// Deterministic per seed. size_budget bounds the number of main-expression
/// statements. Throws GenerationExhausted when the acceptance rate
/// collapses.
std::vector<FuzzCase> fuzz_programs(uint64_t seed, int n, int size_budget);

}  // namespace ivl

#endif
