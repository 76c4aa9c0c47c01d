#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "tsvar/calculus.hpp"
#include "tsvar/lagrangian.hpp"
#include "tsvar/timescale.hpp"
#include "tsvar/variational.hpp"

namespace tsvar {

// Inputs of the Lagrangian synthesis: build an integrand whose functional
// attains a local minimum at y0 on an exact isolated scale.
//   P(t, y), q(t, y)        free shape functions
//   w(t, y, v)              free second-order correction
//   p(t) > 0                prescribed Legendre quantity on the kappa^2 range
//   C, R0                   free constants of the first-order term and of the
//                           quadratic-coefficient recursion
struct SynthesisSpec {
    TimeScalePtr scale;
    Expression P, q; // over (t, y)
    Expression w;    // over (t, y, v)
    Expression p;    // over (t)
    double C = 0;
    double R0 = 0;
    std::optional<GridFunction> y0; // target minimizer; absent means zero

    void validate() const;
    GridFunction target() const; // y0 or the zero grid function
};

// Quadratic-coefficient grid R on T^kappa: the closed form
//   R(t) = e_r(t, a) R0 + sum over [a, t) of mu e_r(t, sigma(tau)) s(tau)
// of the first-order recursion tied to the prescribed p(t).
GridFunction solve_R_recursion(const SynthesisSpec& spec);

// Synthesized integrand: a shifted three-term form
//   P(t, u) + (C + int P_y(., 0) + q(t, u) - q(t, 0)) z
//     + 1/2 (R(t) + w(t, u, z) - w(t, 0, 0)) z^2
// with u = Y - y0^sigma(t), z = V - y0^Delta(t). Time arguments must be
// kappa points of the spec's scale.
class SynthesizedLagrangian final : public Lagrangian {
  public:
    SynthesizedLagrangian(SynthesisSpec spec, GridFunction R);

    LagEval eval(double t, double y, double v) const override;

    const GridFunction& R() const { return R_; }
    const SynthesisSpec& spec() const { return spec_; }
    // Testing hook: perturb the stored R grid at one kappa index.
    void tamper_R(int index, double delta) { R_.at(index) += delta; }

  private:
    SynthesisSpec spec_;
    GridFunction R_;
    GridFunction IP_;      // prefix delta integral of P_y(., 0)
    GridFunction y0_;      // target on the full scale
    GridFunction y0sig_;   // y0^sigma on T^kappa
    GridFunction y0del_;   // y0^Delta on T^kappa
};

std::shared_ptr<SynthesizedLagrangian> synthesize_lagrangian(const SynthesisSpec& spec);

struct SynthesisReport {
    bool ok = false;
    double max_el_residual = 0;
    double max_legendre_deviation = 0; // |legendre - p| over kappa^2
    bool legendre_positive = false;
    double worst_decrease = 0; // most negative probe delta of the functional
    std::string failure;       // empty when ok
};

SynthesisReport verify_synthesis(const std::shared_ptr<const SynthesizedLagrangian>& lagr,
                                 const SynthesisSpec& spec, std::uint64_t seed = 0,
                                 int probes = 64);

// ---------------------------------------------------------------------------
// Helmholtz side: integro-differential equations H[y](t) + int G[y] = const
// ---------------------------------------------------------------------------

// Pointwise value and first partials of an integrand of an
// integro-differential equation.
struct IntegrandEval {
    double value = 0, dy = 0, dv = 0;
};

class Integrand {
  public:
    virtual ~Integrand() = default;
    virtual IntegrandEval eval(double t, double y, double v) const = 0;
};

using IntegrandPtr = std::shared_ptr<const Integrand>;

IntegrandPtr make_expr_integrand(Expression e); // over (t, y, v)
// H = L_v, G = -L_y of a Lagrangian: the integrated Euler-Lagrange shape.
IntegrandPtr make_Lv_integrand(LagrangianPtr L);
IntegrandPtr make_negLy_integrand(LagrangianPtr L);

struct IntegroDiffEquation {
    IntegrandPtr H, G;
};

IntegroDiffEquation induced_equation(const LagrangianPtr& L);

// Residual of the equation of variation along `base` applied to `u`:
//   H_y[base] u^sigma + H_v[base] u^Delta
//     + sum over [t0, t) of mu (G_y[base] u^sigma + G_v[base] u^Delta),
// on T^kappa with t0 = min. Throws when H_v vanishes along base.
GridFunction equation_of_variation(const IntegroDiffEquation& ide, const GridFunction& base,
                                   const GridFunction& u);

struct HelmholtzVerdict {
    enum class Status { certified_self_adjoint, not_euler_lagrange, undecided };
    Status status = Status::undecided;
    struct Witness {
        GridFunction curve;
        double t = 0;
        double value = 0; // H_y + G_v there
    };
    std::optional<Witness> witness;
    std::string notes;
    std::uint64_t seed = 0;
};

// Samples random bounded curves and inspects D = H_y[y] + G_v[y] on the
// kappa points. All-zero D certifies self-adjointness of the equation of
// variation (sufficient condition); a curve-independent nonzero D rules the
// equation out as an Euler-Lagrange equation; anything else is undecided.
HelmholtzVerdict helmholtz_check(const IntegroDiffEquation& ide, const TimeScalePtr& scale,
                                 int trials, std::uint64_t seed = 0);

} // namespace tsvar
