#pragma once

#include "tsvar/timescale.hpp"

namespace tsvar {

// Forward difference quotient (y^sigma - y) / mu on right-scattered points.
// The result loses the top point of y's domain (T^kappa trimming).
GridFunction delta_derivative(const GridFunction& y);

// Backward mirror: (y - y^rho) / nu, losing the bottom point (T_kappa).
GridFunction nabla_derivative(const GridFunction& y);

// Integral over the scale interval between two scale points:
//   delta: sum of mu(t) f(t) over [a, b);  nabla: sum of nu(t) f(t) over (a, b].
// a = b gives 0, a > b the negated sum. Endpoints must lie on the scale and
// f must cover the summation range.
double delta_integral(const GridFunction& f, double a, double b);
double nabla_integral(const GridFunction& f, double a, double b);

// Index-range primitives used by the solvers (exact prefix sums).
double delta_integral_idx(const GridFunction& f, int ia, int ib);
double nabla_integral_idx(const GridFunction& f, int ia, int ib);

// F(t) = integral from points[ia] to t, defined for t in [points[ia], max].
GridFunction delta_prefix(const GridFunction& f, int ia);
GridFunction nabla_prefix(const GridFunction& f, int ia);

// Isolated-scale exponential e_r(t, s0) = prod over [s0, t) of (1 + mu r).
// Defined for t >= s0; no regressivity requirement (factors may be negative).
GridFunction ts_exponential(const GridFunction& r, double s0);

} // namespace tsvar
