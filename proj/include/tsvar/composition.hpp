#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsvar/calculus.hpp"
#include "tsvar/expr.hpp"
#include "tsvar/newton.hpp"
#include "tsvar/timescale.hpp"

namespace tsvar {

// Composition functional
//   L[y] = H(F_1, ..., F_k, F_{k+1}, ..., F_{k+n})
// of k delta integrals of f_i(t, y^sigma, y^Delta) and n nabla integrals of
// f_i(t, y^rho, y^nabla), optionally constrained by K[y] = P(G_1, ...) = d.
// The outer functions are expressions over variables F1..Fm / G1..Gm.
struct CompositionProblem {
    TimeScalePtr scale;
    std::vector<Expression> delta_f;
    std::vector<Expression> nabla_f;
    Expression outer;
    std::optional<double> y_a, y_b;

    struct Iso {
        std::vector<Expression> delta_g;
        std::vector<Expression> nabla_g;
        Expression outer;
        double target = 0;
    };
    std::optional<Iso> iso;

    int k() const { return static_cast<int>(delta_f.size()); }
    int n() const { return static_cast<int>(nabla_f.size()); }
    void validate() const;
};

// Component integrals, outer partials and the running-integral kernels
// xi (delta side, on T^kappa) and chi (nabla side, on T_kappa); u and w are
// their analogues for the constraint when present.
struct CompositionState {
    std::vector<double> F;
    std::vector<double> Hprime;
    GridFunction xi;
    GridFunction chi;
    std::vector<double> G;
    std::vector<double> Pprime;
    std::optional<GridFunction> u, w;
};

struct CompositionValue {
    double L_value = 0;
    CompositionState state;
};

CompositionValue evaluate_composition(const CompositionProblem& cp, const GridFunction& y);

// Both integral-form Euler-Lagrange residuals: the nabla form
// xi(rho(t)) + chi(t) on T_kappa and the delta form xi(t) + chi(sigma(t)) on
// T^kappa, each reduced by its mean.
struct ELForms {
    GridFunction nabla_form;
    GridFunction delta_form;
    double c_nabla = 0;
    double c_delta = 0;
};

ELForms el_residuals(const CompositionProblem& cp, const GridFunction& y);

// Pointwise gap between the delta-form and nabla-form left-hand sides with
// the jumps of the *model* scale: on an exact scale this is the plain
// same-point difference; on a sampled dense scale, points whose model
// neighbourhood is dense keep xi(t)/chi(t) in place, so the gap isolates
// the genuine jump contributions. Defined on T^kappa_kappa.
GridFunction el_form_divergence(const CompositionProblem& cp, const GridFunction& y);

struct TransversalityResiduals {
    std::optional<double> initial;  // absent when rho(sigma(a)) != a
    std::optional<double> terminal; // absent when sigma(rho(b)) != b
};

TransversalityResiduals transversality_residuals(const CompositionProblem& cp,
                                                 const GridFunction& y);

// The four isoperimetric combinations of Theorem-style conditions, each
// reduced by its mean over T^kappa_kappa:
//   1: xi^rho + chi - lambda (u^rho + w)    2: xi + chi^sigma - lambda (u^rho + w)
//   3: xi^rho + chi - lambda (u + w^sigma)  4: xi + chi^sigma - lambda (u + w^sigma)
std::array<GridFunction, 4> iso_residuals(const CompositionProblem& cp, const GridFunction& y,
                                          double lambda);

enum class Normality { normal, abnormal, undetermined, not_applicable };

Normality classify_extremal(const CompositionProblem& cp, const GridFunction& y);

struct Extremal {
    GridFunction y;
    std::optional<double> lambda;
    double L_value = 0;
    std::map<std::string, double> residual_summary;
    Normality normality = Normality::not_applicable;
};

enum class Objective { minimize, maximize };

struct SolveOptions {
    Objective objective = Objective::minimize;
    int multistart = 8;
    std::uint64_t seed = 0;
    NewtonOptions newton;
};

// Multi-start damped-Newton solve of the stationarity system over the free
// values (interior plus any free endpoint, plus the multiplier when the
// isoperimetric constraint is present). Among converged stationary points
// the best by objective is returned; ties within 1e-12 keep the lowest
// start index.
Extremal solve_composition(const CompositionProblem& cp, const SolveOptions& opts = {});

} // namespace tsvar
