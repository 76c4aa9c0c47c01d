#pragma once

#include <stdexcept>
#include <string>

namespace tsvar {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed scale specs, invalid point sets, off-scale
// queries, boundary violations, schema problems in problem files.
struct input_error : error {
    using error::error;
};

// Expression-language syntax errors. Column is 1-based.
struct parse_error : input_error {
    parse_error(const std::string& msg, int column_, int line_ = 0)
        : input_error(msg), column(column_), line(line_) {}
    int column;
    int line;
};

// Arithmetic domain faults during expression evaluation (log of a
// non-positive number, 0^negative, ...). Carries the offending
// subexpression in the message.
struct eval_error : error {
    using error::error;
};

// Solver diagnostics: Newton did not converge, singular Hessian, ...
struct solve_error : error {
    using error::error;
};

} // namespace tsvar
