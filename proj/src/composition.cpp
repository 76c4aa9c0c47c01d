#include "tsvar/composition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace tsvar {

namespace {

std::vector<std::string> outer_vars(const char* prefix, int count) {
    std::vector<std::string> v;
    v.reserve(static_cast<size_t>(count));
    for (int i = 1; i <= count; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

void check_inner_vars(const std::vector<Expression>& fs, const char* what) {
    for (const auto& f : fs)
        if (f.vars() != std::vector<std::string>{"t", "y", "v"})
            throw input_error(std::string(what) + " integrands must be declared over (t, y, v)");
}

double mean_range(const GridFunction& g, int lo, int hi) {
    double s = 0;
    for (int i = lo; i <= hi; ++i) s += g[i];
    return s / static_cast<double>(hi - lo + 1);
}

void check_boundary(const char* which, double got, const std::optional<double>& want) {
    if (!want) return;
    if (std::fabs(got - *want) > 1e-10 * std::max(1.0, std::fabs(*want))) {
        std::ostringstream os;
        os.precision(17);
        os << "boundary condition violated: y(" << which << ") = " << got << ", expected "
           << *want;
        throw input_error(os.str());
    }
}

// Integrals, outer partials and running kernels for one (f, outer) family.
struct FamilyData {
    std::vector<double> F;      // component integrals
    std::vector<double> prime;  // outer first partials at F
    std::vector<double> second; // packed outer second partials
    double value = 0;           // outer value at F
    GridFunction xi;            // delta kernel on T^kappa
    GridFunction chi;           // nabla kernel on T_kappa
};

FamilyData family_data(const TimeScalePtr& scale, const std::vector<Expression>& delta_f,
                       const std::vector<Expression>& nabla_f, const Expression& outer,
                       const GridFunction& y, bool with_second) {
    const TimeScale& ts = *scale;
    const int N = ts.size();
    const int k = static_cast<int>(delta_f.size());
    const int n = static_cast<int>(nabla_f.size());

    FamilyData out{std::vector<double>(static_cast<size_t>(k + n), 0.0),
                   {},
                   {},
                   0.0,
                   GridFunction::constant(scale, 0.0),
                   GridFunction::constant(scale, 0.0)};

    // per-point values and (y, v) partials of every integrand
    std::vector<std::vector<double>> fv_d(static_cast<size_t>(k)), fy_d(static_cast<size_t>(k));
    std::vector<std::vector<double>> fv_n(static_cast<size_t>(n)), fy_n(static_cast<size_t>(n));
    std::array<double, 3> xv{};
    std::array<double, 3> grad{};
    for (int i = 0; i < k; ++i) {
        fv_d[static_cast<size_t>(i)].resize(static_cast<size_t>(N - 1));
        fy_d[static_cast<size_t>(i)].resize(static_cast<size_t>(N - 1));
        for (int j = 0; j + 1 < N; ++j) {
            double mu = ts.mu(j);
            xv = {ts.point(j), y[j + 1], (y[j + 1] - y[j]) / mu};
            double val = delta_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            out.F[static_cast<size_t>(i)] += mu * val;
            fy_d[static_cast<size_t>(i)][static_cast<size_t>(j)] = grad[1];
            fv_d[static_cast<size_t>(i)][static_cast<size_t>(j)] = grad[2];
        }
    }
    for (int i = 0; i < n; ++i) {
        fv_n[static_cast<size_t>(i)].resize(static_cast<size_t>(N - 1));
        fy_n[static_cast<size_t>(i)].resize(static_cast<size_t>(N - 1));
        for (int j = 1; j < N; ++j) {
            double nu = ts.nu(j);
            xv = {ts.point(j), y[j - 1], (y[j] - y[j - 1]) / nu};
            double val = nabla_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            out.F[static_cast<size_t>(k + i)] += nu * val;
            fy_n[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] = grad[1];
            fv_n[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] = grad[2];
        }
    }

    const int m = k + n;
    out.prime.assign(static_cast<size_t>(m), 0.0);
    if (with_second) out.second.assign(static_cast<size_t>(m * (m + 1) / 2), 0.0);
    out.value = outer.eval_d2(out.F, out.prime, with_second ? std::span<double>(out.second)
                                                            : std::span<double>());

    // xi(t) = sum_{i<=k} H'_i (f_iv[t] - prefix delta integral of f_iy)
    std::vector<double> xi(static_cast<size_t>(N - 1), 0.0);
    for (int i = 0; i < k; ++i) {
        double w = out.prime[static_cast<size_t>(i)];
        double acc = 0;
        for (int j = 0; j + 1 < N; ++j) {
            xi[static_cast<size_t>(j)] += w * (fv_d[static_cast<size_t>(i)][static_cast<size_t>(j)] - acc);
            acc += ts.mu(j) * fy_d[static_cast<size_t>(i)][static_cast<size_t>(j)];
        }
    }
    // chi(t) = sum_{i>k} H'_i (f_iv{t} - prefix nabla integral of f_iy)
    std::vector<double> chi(static_cast<size_t>(N - 1), 0.0);
    for (int i = 0; i < n; ++i) {
        double w = out.prime[static_cast<size_t>(k + i)];
        double acc = 0;
        for (int j = 1; j < N; ++j) {
            acc += ts.nu(j) * fy_n[static_cast<size_t>(i)][static_cast<size_t>(j - 1)];
            chi[static_cast<size_t>(j - 1)] += w * (fv_n[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] - acc);
        }
    }
    out.xi = GridFunction(scale, 0, std::move(xi));
    out.chi = GridFunction(scale, 1, std::move(chi));
    return out;
}

} // namespace

void CompositionProblem::validate() const {
    if (!scale) throw input_error("composition problem needs a scale");
    if (scale->size() < 3)
        throw input_error("composition problem needs a scale with at least three points");
    if (delta_f.empty() && nabla_f.empty())
        throw input_error("composition problem needs at least one integrand (k + n >= 1)");
    check_inner_vars(delta_f, "delta");
    check_inner_vars(nabla_f, "nabla");
    if (outer.vars() != outer_vars("F", k() + n()))
        throw input_error("outer function must be declared over F1..F" +
                          std::to_string(k() + n()));
    if (iso) {
        if (iso->delta_g.empty() && iso->nabla_g.empty())
            throw input_error("isoperimetric constraint needs at least one integrand");
        check_inner_vars(iso->delta_g, "constraint delta");
        check_inner_vars(iso->nabla_g, "constraint nabla");
        int mp = static_cast<int>(iso->delta_g.size() + iso->nabla_g.size());
        if (iso->outer.vars() != outer_vars("G", mp))
            throw input_error("constraint outer function must be declared over G1..G" +
                              std::to_string(mp));
        if (!std::isfinite(iso->target))
            throw input_error("isoperimetric target d must be finite");
    }
}

CompositionValue evaluate_composition(const CompositionProblem& cp, const GridFunction& y) {
    cp.validate();
    if (!y.full()) throw input_error("trajectory must cover the whole scale");
    check_boundary("a", y[0], cp.y_a);
    check_boundary("b", y[y.scale()->size() - 1], cp.y_b);

    FamilyData main = family_data(cp.scale, cp.delta_f, cp.nabla_f, cp.outer, y, false);
    CompositionValue out{main.value,
                         CompositionState{std::move(main.F), std::move(main.prime),
                                          std::move(main.xi), std::move(main.chi),
                                          {}, {}, std::nullopt, std::nullopt}};
    if (cp.iso) {
        FamilyData con =
            family_data(cp.scale, cp.iso->delta_g, cp.iso->nabla_g, cp.iso->outer, y, false);
        out.state.G = std::move(con.F);
        out.state.Pprime = std::move(con.prime);
        out.state.u = std::move(con.xi);
        out.state.w = std::move(con.chi);
    }
    return out;
}

ELForms el_residuals(const CompositionProblem& cp, const GridFunction& y) {
    CompositionValue v = evaluate_composition(cp, y);
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const GridFunction& xi = v.state.xi;
    const GridFunction& chi = v.state.chi;

    std::vector<double> nf(static_cast<size_t>(N - 1));
    for (int i = 1; i < N; ++i) nf[static_cast<size_t>(i - 1)] = xi[ts.rho_index(i)] + chi[i];
    std::vector<double> df(static_cast<size_t>(N - 1));
    for (int i = 0; i + 1 < N; ++i) df[static_cast<size_t>(i)] = xi[i] + chi[ts.sigma_index(i)];

    ELForms out{GridFunction(cp.scale, 1, std::move(nf)), GridFunction(cp.scale, 0, std::move(df)),
                0, 0};
    out.c_nabla = mean_range(out.nabla_form, 1, N - 1);
    out.c_delta = mean_range(out.delta_form, 0, N - 2);
    for (int i = 1; i < N; ++i) out.nabla_form.at(i) -= out.c_nabla;
    for (int i = 0; i + 1 < N; ++i) out.delta_form.at(i) -= out.c_delta;
    return out;
}

GridFunction el_form_divergence(const CompositionProblem& cp, const GridFunction& y) {
    CompositionValue v = evaluate_composition(cp, y);
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const GridFunction& xi = v.state.xi;
    const GridFunction& chi = v.state.chi;
    std::vector<double> d;
    d.reserve(static_cast<size_t>(N - 2));
    for (int i = 1; i + 1 < N; ++i) {
        int sm = ts.sigma_model_index(i);
        int rm = ts.rho_model_index(i);
        d.push_back((xi[i] + chi[sm]) - (xi[rm] + chi[i]));
    }
    return GridFunction(cp.scale, 1, std::move(d));
}

TransversalityResiduals transversality_residuals(const CompositionProblem& cp,
                                                 const GridFunction& y) {
    CompositionValue v = evaluate_composition(cp, y);
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const int k = cp.k(), n = cp.n();
    TransversalityResiduals out;

    std::array<double, 3> xv{};
    std::array<double, 3> grad{};

    if (ts.rho_index(ts.sigma_index(0)) == 0) {
        // rho(sigma(a)) = a holds on every finite scale; keep the guard
        // explicit anyway.
        double r = 0;
        for (int i = 0; i < k; ++i) {
            double mu = ts.mu(0);
            xv = {ts.point(0), y[1], (y[1] - y[0]) / mu};
            cp.delta_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            r += v.state.Hprime[static_cast<size_t>(i)] * grad[2];
        }
        int sa = ts.sigma_index(0);
        for (int i = 0; i < n; ++i) {
            double nu = ts.nu(sa);
            xv = {ts.point(sa), y[sa - 1], (y[sa] - y[sa - 1]) / nu};
            cp.nabla_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            // one-term nabla integral over (a, sigma(a)]
            r += v.state.Hprime[static_cast<size_t>(k + i)] * (grad[2] - nu * grad[1]);
        }
        out.initial = r;
    }
    if (ts.sigma_index(ts.rho_index(N - 1)) == N - 1) {
        double r = 0;
        int rb = ts.rho_index(N - 1);
        for (int i = 0; i < k; ++i) {
            double mu = ts.mu(rb);
            xv = {ts.point(rb), y[rb + 1], (y[rb + 1] - y[rb]) / mu};
            cp.delta_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            // one-term delta integral over [rho(b), b)
            r += v.state.Hprime[static_cast<size_t>(i)] * (grad[2] + mu * grad[1]);
        }
        for (int i = 0; i < n; ++i) {
            double nu = ts.nu(N - 1);
            xv = {ts.point(N - 1), y[N - 2], (y[N - 1] - y[N - 2]) / nu};
            cp.nabla_f[static_cast<size_t>(i)].eval_d2(xv, grad, {});
            r += v.state.Hprime[static_cast<size_t>(k + i)] * grad[2];
        }
        out.terminal = r;
    }
    return out;
}

std::array<GridFunction, 4> iso_residuals(const CompositionProblem& cp, const GridFunction& y,
                                          double lambda) {
    if (!cp.iso) throw input_error("iso_residuals: the problem has no isoperimetric constraint");
    CompositionValue v = evaluate_composition(cp, y);
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const GridFunction& xi = v.state.xi;
    const GridFunction& chi = v.state.chi;
    const GridFunction& u = *v.state.u;
    const GridFunction& w = *v.state.w;

    auto make = [&](auto&& f) {
        std::vector<double> vals;
        vals.reserve(static_cast<size_t>(N - 2));
        for (int i = 1; i + 1 < N; ++i) vals.push_back(f(i));
        GridFunction g(cp.scale, 1, std::move(vals));
        double c = mean_range(g, 1, N - 2);
        for (int i = 1; i + 1 < N; ++i) g.at(i) -= c;
        return g;
    };
    auto A = [&](int i) { return xi[ts.rho_index(i)] + chi[i]; };
    auto B = [&](int i) { return xi[i] + chi[ts.sigma_index(i)]; };
    auto C1 = [&](int i) { return u[ts.rho_index(i)] + w[i]; };
    auto C2 = [&](int i) { return u[i] + w[ts.sigma_index(i)]; };

    return {make([&](int i) { return A(i) - lambda * C1(i); }),
            make([&](int i) { return B(i) - lambda * C1(i); }),
            make([&](int i) { return A(i) - lambda * C2(i); }),
            make([&](int i) { return B(i) - lambda * C2(i); })};
}

Normality classify_extremal(const CompositionProblem& cp, const GridFunction& y) {
    if (!cp.iso) throw input_error("classify_extremal: the problem has no isoperimetric constraint");
    CompositionValue v = evaluate_composition(cp, y);
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const GridFunction& u = *v.state.u;
    const GridFunction& w = *v.state.w;

    auto dev_of = [&](auto&& f) {
        double s = 0;
        for (int i = 1; i + 1 < N; ++i) s += f(i);
        double mean = s / static_cast<double>(N - 2);
        double dev = 0;
        for (int i = 1; i + 1 < N; ++i) dev = std::max(dev, std::fabs(f(i) - mean));
        return dev;
    };
    double dev1 = dev_of([&](int i) { return u[i] + w[ts.sigma_index(i)]; });
    double dev2 = dev_of([&](int i) { return u[ts.rho_index(i)] + w[i]; });
    double dev = std::max(dev1, dev2);

    const double tol = 1e-8;
    if (dev <= tol) return Normality::abnormal;
    if (dev >= 10 * tol) return Normality::normal;
    return Normality::undetermined;
}

// ---------------------------------------------------------------------------
// Stationarity solver
// ---------------------------------------------------------------------------

namespace {

// Dense gradient and tridiagonal Hessian of one component integral with
// respect to the full y vector.
struct ComponentDerivs {
    std::vector<double> grad;      // size N
    std::vector<double> h_diag;    // size N
    std::vector<double> h_off;     // size N-1, entry j couples y_j and y_{j+1}
};

void accumulate_component(const TimeScale& ts, const Expression& f, bool is_delta,
                          const GridFunction& y, double& integral, ComponentDerivs& cd) {
    const int N = ts.size();
    integral = 0;
    cd.grad.assign(static_cast<size_t>(N), 0.0);
    cd.h_diag.assign(static_cast<size_t>(N), 0.0);
    cd.h_off.assign(static_cast<size_t>(N - 1), 0.0);
    std::array<double, 3> xv{};
    std::array<double, 3> g{};
    std::array<double, 6> h{};
    for (int j = 0; j + 1 < N; ++j) {
        double wgt, t, Y, V, dY[2], dV[2]; // derivative of (Y,V) wrt (y_j, y_{j+1})
        if (is_delta) {
            wgt = ts.mu(j);
            t = ts.point(j);
            Y = y[j + 1];
            V = (y[j + 1] - y[j]) / wgt;
            dY[0] = 0; dY[1] = 1;
            dV[0] = -1.0 / wgt; dV[1] = 1.0 / wgt;
        } else {
            wgt = ts.nu(j + 1);
            t = ts.point(j + 1);
            Y = y[j];
            V = (y[j + 1] - y[j]) / wgt;
            dY[0] = 1; dY[1] = 0;
            dV[0] = -1.0 / wgt; dV[1] = 1.0 / wgt;
        }
        xv = {t, Y, V};
        double val = f.eval_d2(xv, g, h);
        integral += wgt * val;
        double fy = g[1], fv = g[2];
        double fyy = h[2], fyv = h[4], fvv = h[5];
        for (int a = 0; a < 2; ++a)
            cd.grad[static_cast<size_t>(j + a)] += wgt * (fy * dY[a] + fv * dV[a]);
        double loc[2][2];
        for (int a = 0; a < 2; ++a)
            for (int b = a; b < 2; ++b)
                loc[a][b] = wgt * (fyy * dY[a] * dY[b] + fyv * (dY[a] * dV[b] + dV[a] * dY[b]) +
                                   fvv * dV[a] * dV[b]);
        cd.h_diag[static_cast<size_t>(j)] += loc[0][0];
        cd.h_diag[static_cast<size_t>(j + 1)] += loc[1][1];
        cd.h_off[static_cast<size_t>(j)] += loc[0][1];
    }
}

struct UnknownMap {
    std::vector<int> slot; // per scale index: unknown slot or -1 when fixed
    int count = 0;
};

UnknownMap make_unknowns(const CompositionProblem& cp) {
    const int N = cp.scale->size();
    UnknownMap um;
    um.slot.assign(static_cast<size_t>(N), -1);
    for (int i = 0; i < N; ++i) {
        bool fixed = (i == 0 && cp.y_a) || (i == N - 1 && cp.y_b);
        if (!fixed) um.slot[static_cast<size_t>(i)] = um.count++;
    }
    return um;
}

} // namespace

Extremal solve_composition(const CompositionProblem& cp, const SolveOptions& opts) {
    cp.validate();
    if (cp.scale->sampled())
        throw input_error("solve_composition needs an exact isolated scale");
    const TimeScale& ts = *cp.scale;
    const int N = ts.size();
    const int k = cp.k(), n = cp.n();
    const int m = k + n;
    const int mi = cp.iso ? static_cast<int>(cp.iso->delta_g.size() + cp.iso->nabla_g.size()) : 0;
    const UnknownMap um = make_unknowns(cp);
    const int nu = um.count + (cp.iso ? 1 : 0); // plus multiplier

    // residual r = [ d/dy_j ( H(F) - lambda (P(G) - d) ) ; P(G) - d ]
    auto assemble = [&](const std::vector<double>& x, std::vector<double>& r,
                        std::vector<double>* jac) {
        std::vector<double> yv(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) {
            int s = um.slot[static_cast<size_t>(i)];
            if (s >= 0)
                yv[static_cast<size_t>(i)] = x[static_cast<size_t>(s)];
            else
                yv[static_cast<size_t>(i)] = (i == 0) ? *cp.y_a : *cp.y_b;
        }
        GridFunction y(cp.scale, std::move(yv));
        double lambda = cp.iso ? x[static_cast<size_t>(nu - 1)] : 0.0;

        const int total = m + mi;
        std::vector<double> F(static_cast<size_t>(total));
        std::vector<ComponentDerivs> cds(static_cast<size_t>(total));
        int c = 0;
        for (int i = 0; i < k; ++i, ++c)
            accumulate_component(ts, cp.delta_f[static_cast<size_t>(i)], true, y,
                                 F[static_cast<size_t>(c)], cds[static_cast<size_t>(c)]);
        for (int i = 0; i < n; ++i, ++c)
            accumulate_component(ts, cp.nabla_f[static_cast<size_t>(i)], false, y,
                                 F[static_cast<size_t>(c)], cds[static_cast<size_t>(c)]);
        if (cp.iso) {
            for (auto& g : cp.iso->delta_g) {
                accumulate_component(ts, g, true, y, F[static_cast<size_t>(c)],
                                     cds[static_cast<size_t>(c)]);
                ++c;
            }
            for (auto& g : cp.iso->nabla_g) {
                accumulate_component(ts, g, false, y, F[static_cast<size_t>(c)],
                                     cds[static_cast<size_t>(c)]);
                ++c;
            }
        }

        std::vector<double> Hp(static_cast<size_t>(m)), Hs(static_cast<size_t>(m * (m + 1) / 2));
        cp.outer.eval_d2(std::span<const double>(F.data(), static_cast<size_t>(m)), Hp, Hs);
        std::vector<double> Pp, Ps;
        double K = 0;
        if (cp.iso) {
            Pp.assign(static_cast<size_t>(mi), 0.0);
            Ps.assign(static_cast<size_t>(mi * (mi + 1) / 2), 0.0);
            K = cp.iso->outer.eval_d2(
                std::span<const double>(F.data() + m, static_cast<size_t>(mi)), Pp, Ps);
        }

        std::fill(r.begin(), r.end(), 0.0);
        // gradient rows
        for (int i = 0; i < N; ++i) {
            int s = um.slot[static_cast<size_t>(i)];
            if (s < 0) continue;
            double g = 0;
            for (int q = 0; q < m; ++q)
                g += Hp[static_cast<size_t>(q)] * cds[static_cast<size_t>(q)].grad[static_cast<size_t>(i)];
            for (int q = 0; q < mi; ++q)
                g -= lambda * Pp[static_cast<size_t>(q)] *
                     cds[static_cast<size_t>(m + q)].grad[static_cast<size_t>(i)];
            r[static_cast<size_t>(s)] = g;
        }
        if (cp.iso) r[static_cast<size_t>(nu - 1)] = K - cp.iso->target;

        if (!jac) return;
        std::fill(jac->begin(), jac->end(), 0.0);
        auto J = [&](int a, int b) -> double& {
            return (*jac)[static_cast<size_t>(a * nu + b)];
        };
        // tridiagonal pieces: sum of weight * component Hessians
        auto add_tridiag = [&](double wgt, const ComponentDerivs& cd) {
            if (wgt == 0.0) return;
            for (int i = 0; i < N; ++i) {
                int s = um.slot[static_cast<size_t>(i)];
                if (s < 0) continue;
                J(s, s) += wgt * cd.h_diag[static_cast<size_t>(i)];
                if (i + 1 < N) {
                    int s2 = um.slot[static_cast<size_t>(i + 1)];
                    if (s2 >= 0) {
                        J(s, s2) += wgt * cd.h_off[static_cast<size_t>(i)];
                        J(s2, s) += wgt * cd.h_off[static_cast<size_t>(i)];
                    }
                }
            }
        };
        for (int q = 0; q < m; ++q) add_tridiag(Hp[static_cast<size_t>(q)], cds[static_cast<size_t>(q)]);
        for (int q = 0; q < mi; ++q)
            add_tridiag(-lambda * Pp[static_cast<size_t>(q)], cds[static_cast<size_t>(m + q)]);
        // rank updates from outer second derivatives
        auto add_rank = [&](double wgt, const std::vector<double>& ga, const std::vector<double>& gb) {
            if (wgt == 0.0) return;
            for (int i = 0; i < N; ++i) {
                int si = um.slot[static_cast<size_t>(i)];
                if (si < 0 || ga[static_cast<size_t>(i)] == 0.0) continue;
                double gi = wgt * ga[static_cast<size_t>(i)];
                for (int j2 = 0; j2 < N; ++j2) {
                    int sj = um.slot[static_cast<size_t>(j2)];
                    if (sj < 0) continue;
                    J(si, sj) += gi * gb[static_cast<size_t>(j2)];
                }
            }
        };
        for (int a = 0; a < m; ++a)
            for (int b = a; b < m; ++b) {
                double h2 = Hs[static_cast<size_t>(b * (b + 1) / 2 + a)];
                add_rank(h2, cds[static_cast<size_t>(a)].grad, cds[static_cast<size_t>(b)].grad);
                if (a != b)
                    add_rank(h2, cds[static_cast<size_t>(b)].grad, cds[static_cast<size_t>(a)].grad);
            }
        if (cp.iso) {
            for (int a = 0; a < mi; ++a)
                for (int b = a; b < mi; ++b) {
                    double h2 = -lambda * Ps[static_cast<size_t>(b * (b + 1) / 2 + a)];
                    add_rank(h2, cds[static_cast<size_t>(m + a)].grad,
                             cds[static_cast<size_t>(m + b)].grad);
                    if (a != b)
                        add_rank(h2, cds[static_cast<size_t>(m + b)].grad,
                                 cds[static_cast<size_t>(m + a)].grad);
                }
            // borders: d(grad)/dlambda and d(constraint)/dy
            for (int i = 0; i < N; ++i) {
                int s = um.slot[static_cast<size_t>(i)];
                if (s < 0) continue;
                double gk = 0;
                for (int q = 0; q < mi; ++q)
                    gk += Pp[static_cast<size_t>(q)] *
                          cds[static_cast<size_t>(m + q)].grad[static_cast<size_t>(i)];
                J(s, nu - 1) = -gk;
                J(nu - 1, s) = gk;
            }
            J(nu - 1, nu - 1) = 0.0;
        }
    };

    // multistart
    const double a = ts.min(), b = ts.max();
    double anchor_l = cp.y_a ? *cp.y_a : (cp.y_b ? *cp.y_b : 0.0);
    double anchor_r = cp.y_b ? *cp.y_b : (cp.y_a ? *cp.y_a : 0.0);
    double scale_ref = std::max({1.0, std::fabs(anchor_l), std::fabs(anchor_r),
                                 std::fabs(anchor_r - anchor_l)});
    const double amps[] = {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0};
    const int n_amps = static_cast<int>(sizeof(amps) / sizeof(amps[0]));

    struct Found {
        std::vector<double> x;
        double L = 0;
        int start = 0;
    };
    std::vector<Found> found;
    std::vector<std::string> failures;

    int starts = std::max(1, opts.multistart);
    for (int s = 0; s < starts; ++s) {
        std::mt19937_64 rng(opts.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(s + 1)));
        std::uniform_real_distribution<double> noise(-0.05, 0.05);
        std::vector<double> x0(static_cast<size_t>(nu), 0.0);
        double amp = amps[s % n_amps] * scale_ref;
        for (int i = 0; i < N; ++i) {
            int slot = um.slot[static_cast<size_t>(i)];
            if (slot < 0) continue;
            double tt = (ts.point(i) - a) / (b - a);
            double base = anchor_l + (anchor_r - anchor_l) * tt;
            double bump = 4.0 * tt * (1.0 - tt);
            double val = base + amp * bump;
            if (s > 0) val += noise(rng) * scale_ref;
            x0[static_cast<size_t>(slot)] = val;
        }
        if (cp.iso) x0[static_cast<size_t>(nu - 1)] = 0.0;

        NewtonResult res = damped_newton(assemble, std::move(x0), opts.newton);
        if (!res.converged) {
            std::ostringstream os;
            os.precision(3);
            os << "start " << s << ": " << (res.note.empty() ? "no convergence" : res.note)
               << " (residual " << res.residual_norm << ")";
            failures.push_back(os.str());
            continue;
        }
        // reconstruct trajectory and objective value
        std::vector<double> yv(static_cast<size_t>(N));
        for (int i = 0; i < N; ++i) {
            int slot = um.slot[static_cast<size_t>(i)];
            yv[static_cast<size_t>(i)] =
                slot >= 0 ? res.x[static_cast<size_t>(slot)] : (i == 0 ? *cp.y_a : *cp.y_b);
        }
        GridFunction ycand(cp.scale, yv);
        double L;
        try {
            L = evaluate_composition(cp, ycand).L_value;
        } catch (const std::exception&) {
            continue;
        }
        bool dup = false;
        for (const auto& f : found) {
            double dist = 0;
            for (size_t i2 = 0; i2 < f.x.size(); ++i2)
                dist = std::max(dist, std::fabs(f.x[i2] - res.x[i2]));
            if (dist <= 1e-7 * scale_ref) {
                dup = true;
                break;
            }
        }
        if (!dup) found.push_back({res.x, L, s});
    }

    if (found.empty()) {
        std::string msg = "solve_composition: no start converged";
        for (const auto& f : failures) msg += "\n  " + f;
        throw solve_error(msg);
    }

    const bool minimize = opts.objective == Objective::minimize;
    const Found* best = &found.front();
    for (const auto& f : found) {
        double diff = f.L - best->L;
        if ((minimize && diff < -1e-12) || (!minimize && diff > 1e-12)) best = &f;
    }

    std::vector<double> yv(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
        int slot = um.slot[static_cast<size_t>(i)];
        yv[static_cast<size_t>(i)] =
            slot >= 0 ? best->x[static_cast<size_t>(slot)] : (i == 0 ? *cp.y_a : *cp.y_b);
    }
    Extremal ex{GridFunction(cp.scale, std::move(yv)), std::nullopt, best->L, {}, Normality::not_applicable};
    if (cp.iso) ex.lambda = best->x[static_cast<size_t>(nu - 1)];

    ELForms forms = el_residuals(cp, ex.y);
    ex.residual_summary["el_nabla_form"] = forms.nabla_form.max_abs();
    ex.residual_summary["el_delta_form"] = forms.delta_form.max_abs();
    if (cp.iso) {
        auto ir = iso_residuals(cp, ex.y, *ex.lambda);
        for (int q = 0; q < 4; ++q)
            ex.residual_summary["iso_condition_" + std::to_string(q + 1)] =
                ir[static_cast<size_t>(q)].max_abs();
        double K = cp.iso->outer.eval(evaluate_composition(cp, ex.y).state.G);
        ex.residual_summary["constraint_deviation"] = std::fabs(K - cp.iso->target);
        ex.normality = classify_extremal(cp, ex.y);
    }
    TransversalityResiduals tv = transversality_residuals(cp, ex.y);
    if (!cp.y_a && tv.initial) ex.residual_summary["transversality_initial"] = std::fabs(*tv.initial);
    if (!cp.y_b && tv.terminal)
        ex.residual_summary["transversality_terminal"] = std::fabs(*tv.terminal);
    return ex;
}

} // namespace tsvar
