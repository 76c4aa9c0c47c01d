#pragma once

#include <functional>
#include <string>
#include <vector>

namespace tsvar {

struct NewtonOptions {
    int max_iter = 200;
    double gtol = 1e-12;        // stop on ||residual||_inf below this
    int max_backtrack = 60;     // halving steps in the line search
    double diverge_norm = 1e8;  // give up when ||x||_inf escapes
};

struct NewtonResult {
    std::vector<double> x;
    bool converged = false;
    double residual_norm = 0;
    int iterations = 0;
    std::string note;
};

// Damped Newton for a square nonlinear system r(x) = 0 with user-supplied
// Jacobian. `eval` fills r (size n) and, when jac != nullptr, the row-major
// n*n Jacobian. Backtracking halves the step until ||r|| decreases.
NewtonResult damped_newton(
    const std::function<void(const std::vector<double>& x, std::vector<double>& r,
                             std::vector<double>* jac)>& eval,
    std::vector<double> x0, const NewtonOptions& opts = {});

// Dense solve of A x = b (row-major n*n). Returns false when the matrix is
// numerically singular.
bool dense_solve(std::vector<double> a, std::vector<double> b, std::vector<double>& x);

} // namespace tsvar
