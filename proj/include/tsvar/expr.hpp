#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tsvar/errors.hpp"

namespace tsvar {

// Value with first and second partial derivatives with respect to the
// declared variables. The second-derivative table is stored packed
// (upper triangle, i <= j) and is symmetric by construction.
struct DiffValue {
    std::vector<std::string> vars;
    double value = 0;
    std::vector<double> first;  // one per variable
    std::vector<double> second; // packed upper triangle, size n(n+1)/2

    double d(const std::string& var) const;
    double d2(const std::string& va, const std::string& vb) const;
    static int pack_index(int i, int j, int n);
};

// Parsed arithmetic expression over a declared variable set.
//
// Grammar (in precedence order, ^ right-associative and binding tighter
// than unary minus): literals, variables, pi, e, + - * / ^, unary -, and
// calls of sin cos exp log sqrt abs. Integer exponents are evaluated by
// repeated multiplication, so negative bases are exact; a non-integer
// exponent with a non-positive base is a domain fault.
class Expression {
  public:
    Expression() = default;

    static Expression parse(const std::string& text, std::vector<std::string> vars);

    bool empty() const { return !root_; }
    const std::vector<std::string>& vars() const { return vars_; }
    const std::string& source() const { return src_; }

    double eval(std::span<const double> values) const;

    DiffValue eval_with_partials(std::span<const double> values) const;

    // Allocation-free second-order evaluation for solver inner loops:
    // grad has size n, hess_packed size n(n+1)/2 (may both be empty spans
    // to skip derivative propagation).
    double eval_d2(std::span<const double> values, std::span<double> grad,
                   std::span<double> hess_packed) const;

    std::string pretty() const;

    bool structurally_equal(const Expression& other) const;

    struct Node; // AST node; exposed for the implementation file only

  private:
    std::shared_ptr<const Node> root_;
    std::vector<std::string> vars_;
    std::string src_;
};

} // namespace tsvar
