#ifndef IVL_DIAGNOSTICS_HPP
#define IVL_DIAGNOSTICS_HPP

#include <string>
#include <vector>

#include "ivl/ast.hpp"

namespace ivl {

enum class Severity { Error, Warning };

/// One diagnostic in the shared wf/typecheck format. rule_id is drawn from
/// the closed rule sets documented in wf.hpp and typecheck.hpp.
struct Diagnostic {
    Severity severity = Severity::Error;
    std::string rule_id;
    Span span;
    std::string message;
};

std::string render_diagnostic(const Diagnostic& d, const std::string& file);

inline bool has_errors(const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds)
        if (d.severity == Severity::Error) return true;
    return false;
}

inline bool has_rule(const std::vector<Diagnostic>& ds, const std::string& id) {
    for (const auto& d : ds)
        if (d.rule_id == id) return true;
    return false;
}

}  // namespace ivl

#endif
