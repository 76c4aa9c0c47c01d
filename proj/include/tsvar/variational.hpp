#pragma once

#include <optional>

#include "tsvar/calculus.hpp"
#include "tsvar/lagrangian.hpp"
#include "tsvar/newton.hpp"
#include "tsvar/timescale.hpp"

namespace tsvar {

enum class Flavor { delta, nabla };

// Single-integrand problem: extremize the delta functional
//   integral of L(t, y^sigma, y^Delta) over [a, b]
// (or the nabla mirror with y^rho, y^nabla), optionally with fixed ends.
struct VariationalProblem {
    TimeScalePtr scale;
    LagrangianPtr lagrangian;
    Flavor flavor = Flavor::delta;
    std::optional<double> y_a, y_b;

    void validate() const;
};

// Euler-Lagrange constancy report. residual is the deviation of
//   g(t) = L_v(t) - integral of L_y from a to t
// from its mean over the kappa domain; legendre carries the second-order
// quantity on the twice-trimmed domain (delta flavor only).
struct ELReport {
    GridFunction residual;
    double constant_c = 0;
    double max_abs_residual = 0;
    std::optional<GridFunction> legendre;
    bool legendre_strict = false;
};

double evaluate_functional(const VariationalProblem& p, const GridFunction& y);

ELReport el_integral_residual(const VariationalProblem& p, const GridFunction& y);

ELReport nabla_el_residual(const VariationalProblem& p, const GridFunction& y);

// A(t) + mu(t) [2 C(t) + mu(t) B(t) + (mu(sigma(t)))^dagger A(sigma(t))]
// with A = L_vv, B = L_yy, C = L_yv along y; dagger is the reciprocal with
// 0^dagger = 0. Defined on the kappa^2 index range [0, size-3].
GridFunction legendre_quantity(const VariationalProblem& p, const GridFunction& y);

// Damped-Newton stationarity solve of the discretized functional over the
// interior values. Needs both boundary values and an exact isolated scale.
GridFunction solve_direct(const VariationalProblem& p,
                          const std::optional<GridFunction>& init = std::nullopt,
                          const NewtonOptions& opts = {});

} // namespace tsvar
