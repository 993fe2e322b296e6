#ifndef IVL_PARSER_HPP
#define IVL_PARSER_HPP

#include <optional>
#include <stdexcept>
#include <string>

#include "ivl/ast.hpp"

namespace ivl {

/// Parse failure. `standard_form` marks constructors that deviate from the
/// canonical field-initialisation sequence; everything else is `syntax`.
struct ParseError : std::runtime_error {
    enum Kind { Syntax, StandardForm };
    Kind pkind;
    int line, col;
    ParseError(Kind k, int ln, int cl, const std::string& msg)
        : std::runtime_error(msg), pkind(k), line(ln), col(cl) {}
};

/// Parses one `.ivl` source. Synthesizes trivial invariant methods where
/// absent and a default capability class Cap when the source declares none.
/// Statement sugar (locals, if/for/return) is desugared into core
/// expressions here; see README for the accepted forms.
Program parse_program(const std::string& source);

/// Pretty-prints a program in canonical surface syntax. parse ∘ pretty is
/// the identity on parse's image (round-trip property).
std::string pretty_program(const Program& p);
std::string pretty_expr(const ExprPtr& e);

}  // namespace ivl

#endif
