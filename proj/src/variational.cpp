#include "tsvar/variational.hpp"

#include <cmath>
#include <sstream>

namespace tsvar {

namespace {

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

void require_full(const GridFunction& y) {
    if (!y.full())
        throw input_error("trajectory must cover the whole scale");
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

void VariationalProblem::validate() const {
    if (!scale) throw input_error("variational problem needs a scale");
    if (!lagrangian) throw input_error("variational problem needs a Lagrangian");
    if (scale->size() < 3)
        throw input_error("variational problem needs a scale with at least three points");
    if ((y_a && !std::isfinite(*y_a)) || (y_b && !std::isfinite(*y_b)))
        throw input_error("boundary values must be finite");
}

double evaluate_functional(const VariationalProblem& p, const GridFunction& y) {
    p.validate();
    require_full(y);
    const TimeScale& ts = *p.scale;
    check_boundary("a", y[0], p.y_a);
    check_boundary("b", y[ts.size() - 1], p.y_b);
    double acc = 0;
    if (p.flavor == Flavor::delta) {
        for (int i = 0; i + 1 < ts.size(); ++i) {
            double mu = ts.mu(i);
            acc += mu * p.lagrangian->value(ts.point(i), y[i + 1], (y[i + 1] - y[i]) / mu);
        }
    } else {
        for (int i = 1; i < ts.size(); ++i) {
            double nu = ts.nu(i);
            acc += nu * p.lagrangian->value(ts.point(i), y[i - 1], (y[i] - y[i - 1]) / nu);
        }
    }
    return acc;
}

ELReport el_integral_residual(const VariationalProblem& p, const GridFunction& y) {
    p.validate();
    require_full(y);
    if (p.flavor != Flavor::delta)
        throw input_error("el_integral_residual applies to the delta flavor; "
                          "use nabla_el_residual");
    const TimeScale& ts = *p.scale;
    const int kh = ts.kappa_hi();

    // g(t) = L_v(t) - prefix integral of L_y, both along y, on T^kappa
    std::vector<double> g(static_cast<size_t>(kh) + 1);
    double acc = 0; // running integral of L_y over [a, t)
    for (int i = 0; i <= kh; ++i) {
        double mu = ts.mu(i);
        LagEval L = p.lagrangian->eval(ts.point(i), y[i + 1], (y[i + 1] - y[i]) / mu);
        g[static_cast<size_t>(i)] = L.Lv - acc;
        acc += mu * L.Ly;
    }
    double c = mean_of(g);
    double maxr = 0;
    for (double& x : g) {
        x -= c;
        maxr = std::max(maxr, std::fabs(x));
    }
    ELReport rep{GridFunction(p.scale, 0, std::move(g)), c, maxr, std::nullopt, false};
    if (ts.size() >= 3) {
        rep.legendre = legendre_quantity(p, y);
        rep.legendre_strict = true;
        for (int i = rep.legendre->lo(); i <= rep.legendre->hi(); ++i)
            if (!((*rep.legendre)[i] > 0)) rep.legendre_strict = false;
    }
    return rep;
}

ELReport nabla_el_residual(const VariationalProblem& p, const GridFunction& y) {
    p.validate();
    require_full(y);
    if (p.flavor != Flavor::nabla)
        throw input_error("nabla_el_residual applies to the nabla flavor");
    const TimeScale& ts = *p.scale;
    const int n = ts.size();

    // g(t) = L_v(t) - nabla integral of L_y over (a, t], on T_kappa
    std::vector<double> g(static_cast<size_t>(n) - 1);
    double acc = 0;
    for (int i = 1; i < n; ++i) {
        double nu = ts.nu(i);
        LagEval L = p.lagrangian->eval(ts.point(i), y[i - 1], (y[i] - y[i - 1]) / nu);
        acc += nu * L.Ly;
        g[static_cast<size_t>(i - 1)] = L.Lv - acc;
    }
    // the prefix above includes the i-th term; the integral in the
    // Euler-Lagrange form runs over (a, t], so this is already aligned
    double c = mean_of(g);
    double maxr = 0;
    for (double& x : g) {
        x -= c;
        maxr = std::max(maxr, std::fabs(x));
    }
    return ELReport{GridFunction(p.scale, 1, std::move(g)), c, maxr, std::nullopt, false};
}

GridFunction legendre_quantity(const VariationalProblem& p, const GridFunction& y) {
    p.validate();
    require_full(y);
    if (p.flavor != Flavor::delta)
        throw input_error("legendre_quantity applies to the delta flavor");
    const TimeScale& ts = *p.scale;
    const int n = ts.size();
    auto lag = [&](int i) {
        double mu = ts.mu(i);
        return p.lagrangian->eval(ts.point(i), y[i + 1], (y[i + 1] - y[i]) / mu);
    };
    std::vector<double> q;
    q.reserve(static_cast<size_t>(n) - 2);
    LagEval cur = lag(0);
    for (int i = 0; i <= n - 3; ++i) {
        LagEval nxt = lag(i + 1);
        double mu = ts.mu(i);
        double mus = ts.mu(i + 1);
        double dag = mus != 0.0 ? 1.0 / mus : 0.0;
        q.push_back(cur.Lvv + mu * (2.0 * cur.Lyv + mu * cur.Lyy + dag * nxt.Lvv));
        cur = nxt;
    }
    return GridFunction(p.scale, 0, std::move(q));
}

GridFunction solve_direct(const VariationalProblem& p, const std::optional<GridFunction>& init,
                          const NewtonOptions& opts) {
    p.validate();
    if (!p.y_a || !p.y_b)
        throw input_error("solve_direct needs both boundary values");
    if (p.scale->sampled())
        throw input_error("solve_direct needs an exact isolated scale");
    const TimeScale& ts = *p.scale;
    const int n = ts.size();
    const int ni = n - 2; // interior unknowns
    const double ya = *p.y_a, yb = *p.y_b;

    std::vector<double> x0(static_cast<size_t>(ni));
    if (init) {
        require_full(*init);
        for (int j = 0; j < ni; ++j) x0[static_cast<size_t>(j)] = (*init)[j + 1];
    } else {
        for (int j = 0; j < ni; ++j) {
            double t = ts.point(j + 1);
            x0[static_cast<size_t>(j)] = ya + (yb - ya) * (t - ts.min()) / (ts.max() - ts.min());
        }
    }

    // gradient of the discretized functional w.r.t. interior values; the
    // Jacobian of that gradient is the (tridiagonal) Hessian, assembled
    // densely for the pivoted solve.
    auto assemble = [&](const std::vector<double>& x, std::vector<double>& r,
                        std::vector<double>* jac) {
        auto yat = [&](int i) {
            if (i == 0) return ya;
            if (i == n - 1) return yb;
            return x[static_cast<size_t>(i - 1)];
        };
        std::fill(r.begin(), r.end(), 0.0);
        if (jac) std::fill(jac->begin(), jac->end(), 0.0);
        auto scatter = [&](int unknown, double val) {
            if (unknown >= 1 && unknown <= ni) r[static_cast<size_t>(unknown - 1)] += val;
        };
        auto scatter2 = [&](int u1, int u2, double val) {
            if (jac && u1 >= 1 && u1 <= ni && u2 >= 1 && u2 <= ni)
                (*jac)[static_cast<size_t>((u1 - 1) * ni + (u2 - 1))] += val;
        };
        for (int i = 0; i + 1 < n; ++i) {
            // delta term i touches y_i and y_{i+1}; nabla term i+1 touches
            // the same pair, with (Y, V) read backward.
            int lo = i, hi = i + 1;
            double w, t, Y, V, dY_dlo, dY_dhi, dV_dlo, dV_dhi;
            if (p.flavor == Flavor::delta) {
                w = ts.mu(i);
                t = ts.point(i);
                Y = yat(hi);
                V = (yat(hi) - yat(lo)) / w;
                dY_dlo = 0;
                dY_dhi = 1;
                dV_dlo = -1.0 / w;
                dV_dhi = 1.0 / w;
            } else {
                w = ts.nu(i + 1);
                t = ts.point(i + 1);
                Y = yat(lo);
                V = (yat(hi) - yat(lo)) / w;
                dY_dlo = 1;
                dY_dhi = 0;
                dV_dlo = -1.0 / w;
                dV_dhi = 1.0 / w;
            }
            LagEval L = p.lagrangian->eval(t, Y, V);
            scatter(lo, w * (L.Ly * dY_dlo + L.Lv * dV_dlo));
            scatter(hi, w * (L.Ly * dY_dhi + L.Lv * dV_dhi));
            if (jac) {
                const double d[2][2] = {{dY_dlo, dV_dlo}, {dY_dhi, dV_dhi}};
                const int u[2] = {lo, hi};
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        double val = L.Lyy * d[a][0] * d[b][0] +
                                     L.Lyv * (d[a][0] * d[b][1] + d[a][1] * d[b][0]) +
                                     L.Lvv * d[a][1] * d[b][1];
                        scatter2(u[a], u[b], w * val);
                    }
            }
        }
    };

    NewtonResult res = damped_newton(assemble, std::move(x0), opts);
    if (!res.converged) {
        std::ostringstream os;
        os.precision(6);
        if (res.note == "singular Jacobian")
            os << "solve_direct: singular Hessian after " << res.iterations
               << " iterations (the problem is degenerate; gradient norm " << res.residual_norm
               << ")";
        else
            os << "solve_direct: Newton did not converge (" << res.note << "; final gradient norm "
               << res.residual_norm << " after " << res.iterations << " iterations)";
        throw solve_error(os.str());
    }
    std::vector<double> y(static_cast<size_t>(n));
    y.front() = ya;
    y.back() = yb;
    for (int j = 0; j < ni; ++j) y[static_cast<size_t>(j + 1)] = res.x[static_cast<size_t>(j)];
    return GridFunction(p.scale, std::move(y));
}

} // namespace tsvar
