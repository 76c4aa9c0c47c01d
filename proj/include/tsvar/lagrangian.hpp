#pragma once

#include <memory>

#include "tsvar/expr.hpp"

namespace tsvar {

// Pointwise data of an integrand L(t, y, v): value plus first and second
// partials with respect to (y, v). The time argument is never
// differentiated; on a grid it is always a scale point.
struct LagEval {
    double value = 0;
    double Ly = 0, Lv = 0;
    double Lyy = 0, Lyv = 0, Lvv = 0;
};

class Lagrangian {
  public:
    virtual ~Lagrangian() = default;
    virtual LagEval eval(double t, double y, double v) const = 0;
    virtual double value(double t, double y, double v) const {
        return eval(t, y, v).value;
    }
};

using LagrangianPtr = std::shared_ptr<const Lagrangian>;

// Expression-backed integrand over variables (t, y, v).
class ExprLagrangian final : public Lagrangian {
  public:
    explicit ExprLagrangian(Expression expr);
    static LagrangianPtr parse(const std::string& text);

    LagEval eval(double t, double y, double v) const override;
    double value(double t, double y, double v) const override;
    const Expression& expression() const { return expr_; }

  private:
    Expression expr_;
};

} // namespace tsvar
