#include "ivl/diagnostics.hpp"

#include <sstream>

namespace ivl {

std::string render_diagnostic(const Diagnostic& d, const std::string& file) {
    std::ostringstream os;
    os << file << ':' << d.span.line << ':' << d.span.col << ": "
       << (d.severity == Severity::Error ? "error" : "warning") << '['
       << d.rule_id << "]: " << d.message;
    return os.str();
}

}  // namespace ivl
