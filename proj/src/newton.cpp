#include "tsvar/newton.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace tsvar {

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

bool dense_solve(std::vector<double> a, std::vector<double> b, std::vector<double>& x) {
    const int n = static_cast<int>(b.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
        a.data(), n, n);
    Eigen::Map<Eigen::VectorXd> rhs(b.data(), n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    // PartialPivLU has no rank query; probe via the reconstructed residual
    Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;
    double denom = A.cwiseAbs().maxCoeff() * sol.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
    double resid = (A * sol - rhs).cwiseAbs().maxCoeff();
    if (denom > 0 && !(resid <= 1e-6 * denom + 1e-300)) return false;
    x.assign(sol.data(), sol.data() + n);
    return true;
}

NewtonResult damped_newton(
    const std::function<void(const std::vector<double>& x, std::vector<double>& r,
                             std::vector<double>* jac)>& eval,
    std::vector<double> x0, const NewtonOptions& opts) {
    const size_t n = x0.size();
    NewtonResult res;
    res.x = std::move(x0);

    std::vector<double> r(n), jac(n * n), rtrial(n), xtrial(n), step(n);
    for (int it = 0; it < opts.max_iter; ++it) {
        res.iterations = it;
        try {
            eval(res.x, r, &jac);
        } catch (const std::exception& e) {
            res.note = std::string("evaluation fault: ") + e.what();
            return res;
        }
        if (!all_finite(r)) {
            res.note = "non-finite residual";
            return res;
        }
        double rn = inf_norm(r);
        res.residual_norm = rn;
        if (rn <= opts.gtol) {
            res.converged = true;
            return res;
        }
        if (inf_norm(res.x) > opts.diverge_norm) {
            res.note = "iterates diverged";
            return res;
        }
        if (!dense_solve(jac, r, step)) {
            res.note = "singular Jacobian";
            return res;
        }
        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < opts.max_backtrack; ++bt) {
            for (size_t i = 0; i < n; ++i) xtrial[i] = res.x[i] - t * step[i];
            bool ok = true;
            try {
                eval(xtrial, rtrial, nullptr);
            } catch (const std::exception&) {
                ok = false;
            }
            if (ok && all_finite(rtrial) && inf_norm(rtrial) < (1.0 - 1e-4 * t) * rn) {
                res.x = xtrial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            res.note = "line search stalled";
            res.residual_norm = rn;
            return res;
        }
    }
    try {
        eval(res.x, r, nullptr);
        res.residual_norm = inf_norm(r);
        res.converged = res.residual_norm <= opts.gtol;
    } catch (const std::exception&) {
    }
    if (!res.converged && res.note.empty()) res.note = "iteration limit reached";
    return res;
}

} // namespace tsvar
