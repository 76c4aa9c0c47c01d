#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "tsvar/timescale.hpp"

namespace tsvar::testing {

// Random exact isolated scale: gap sizes in [gap_lo, gap_hi].
inline TimeScalePtr random_scale(std::mt19937_64& rng, int min_pts = 4, int max_pts = 12,
                                 double gap_lo = 0.2, double gap_hi = 1.0) {
    std::uniform_int_distribution<int> npts(min_pts, max_pts);
    std::uniform_real_distribution<double> gap(gap_lo, gap_hi);
    std::uniform_real_distribution<double> start(-2.0, 2.0);
    int n = npts(rng);
    std::vector<double> pts;
    pts.reserve(static_cast<size_t>(n));
    double t = start(rng);
    for (int i = 0; i < n; ++i) {
        pts.push_back(t);
        t += gap(rng);
    }
    return make_points(std::move(pts));
}

inline GridFunction random_grid(const TimeScalePtr& ts, std::mt19937_64& rng, double amp = 2.0) {
    std::uniform_real_distribution<double> val(-amp, amp);
    std::vector<double> v;
    v.reserve(static_cast<size_t>(ts->size()));
    for (int i = 0; i < ts->size(); ++i) v.push_back(val(rng));
    return GridFunction(ts, std::move(v));
}

inline bool close_rel(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

} // namespace tsvar::testing
