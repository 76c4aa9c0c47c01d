#include "tsvar/lagrangian.hpp"

#include <array>

namespace tsvar {

ExprLagrangian::ExprLagrangian(Expression expr) : expr_(std::move(expr)) {
    if (expr_.vars() != std::vector<std::string>{"t", "y", "v"})
        throw input_error("Lagrangian expression must be declared over (t, y, v)");
}

LagrangianPtr ExprLagrangian::parse(const std::string& text) {
    return std::make_shared<ExprLagrangian>(Expression::parse(text, {"t", "y", "v"}));
}

LagEval ExprLagrangian::eval(double t, double y, double v) const {
    std::array<double, 3> x{t, y, v};
    std::array<double, 3> g{};
    std::array<double, 6> h{}; // packed upper triangle over (t, y, v)
    LagEval out;
    out.value = expr_.eval_d2(x, g, h);
    out.Ly = g[1];
    out.Lv = g[2];
    // pack order (i<=j): (0,0) (0,1) (1,1) (0,2) (1,2) (2,2)
    out.Lyy = h[2];
    out.Lyv = h[4];
    out.Lvv = h[5];
    return out;
}

double ExprLagrangian::value(double t, double y, double v) const {
    std::array<double, 3> x{t, y, v};
    return expr_.eval(x);
}

} // namespace tsvar
