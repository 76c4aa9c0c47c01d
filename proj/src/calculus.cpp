#include "tsvar/calculus.hpp"

#include <cmath>

namespace tsvar {

GridFunction delta_derivative(const GridFunction& y) {
    const TimeScale& ts = *y.scale();
    if (y.count() < 2)
        throw input_error("delta derivative needs at least 2 covered points");
    std::vector<double> d;
    d.reserve(static_cast<size_t>(y.count()) - 1);
    for (int i = y.lo(); i < y.hi(); ++i)
        d.push_back((y[i + 1] - y[i]) / ts.mu(i));
    return GridFunction(y.scale(), y.lo(), std::move(d));
}

GridFunction nabla_derivative(const GridFunction& y) {
    const TimeScale& ts = *y.scale();
    if (y.count() < 2)
        throw input_error("nabla derivative needs at least 2 covered points");
    std::vector<double> d;
    d.reserve(static_cast<size_t>(y.count()) - 1);
    for (int i = y.lo() + 1; i <= y.hi(); ++i)
        d.push_back((y[i] - y[i - 1]) / ts.nu(i));
    return GridFunction(y.scale(), y.lo() + 1, std::move(d));
}

double delta_integral_idx(const GridFunction& f, int ia, int ib) {
    const TimeScale& ts = *f.scale();
    if (ia == ib) return 0.0;
    double sign = 1.0;
    if (ia > ib) {
        std::swap(ia, ib);
        sign = -1.0;
    }
    double s = 0;
    for (int i = ia; i < ib; ++i) s += ts.mu(i) * f[i];
    return sign * s;
}

double nabla_integral_idx(const GridFunction& f, int ia, int ib) {
    const TimeScale& ts = *f.scale();
    if (ia == ib) return 0.0;
    double sign = 1.0;
    if (ia > ib) {
        std::swap(ia, ib);
        sign = -1.0;
    }
    double s = 0;
    for (int i = ia + 1; i <= ib; ++i) s += ts.nu(i) * f[i];
    return sign * s;
}

double delta_integral(const GridFunction& f, double a, double b) {
    return delta_integral_idx(f, f.scale()->index_of(a), f.scale()->index_of(b));
}

double nabla_integral(const GridFunction& f, double a, double b) {
    return nabla_integral_idx(f, f.scale()->index_of(a), f.scale()->index_of(b));
}

GridFunction delta_prefix(const GridFunction& f, int ia) {
    const TimeScale& ts = *f.scale();
    int n = ts.size();
    std::vector<double> v;
    v.reserve(static_cast<size_t>(n - ia));
    double acc = 0;
    v.push_back(0.0);
    for (int i = ia; i + 1 < n; ++i) {
        acc += ts.mu(i) * f[i];
        v.push_back(acc);
    }
    return GridFunction(f.scale(), ia, std::move(v));
}

GridFunction nabla_prefix(const GridFunction& f, int ia) {
    const TimeScale& ts = *f.scale();
    int n = ts.size();
    std::vector<double> v;
    v.reserve(static_cast<size_t>(n - ia));
    double acc = 0;
    v.push_back(0.0);
    for (int i = ia + 1; i < n; ++i) {
        acc += ts.nu(i) * f[i];
        v.push_back(acc);
    }
    return GridFunction(f.scale(), ia, std::move(v));
}

GridFunction ts_exponential(const GridFunction& r, double s0) {
    const TimeScalePtr& scale = r.scale();
    const TimeScale& ts = *scale;
    if (ts.sampled())
        throw input_error("ts_exponential: sampled dense scales are not supported; "
                          "use an exact isolated scale");
    int i0 = ts.index_of(s0);
    std::vector<double> v;
    v.reserve(static_cast<size_t>(ts.size() - i0));
    double prod = 1.0;
    v.push_back(1.0); // e_r(s0, s0) = 1
    for (int i = i0; i + 1 < ts.size(); ++i) {
        prod *= 1.0 + ts.mu(i) * r[i];
        v.push_back(prod);
    }
    return GridFunction(scale, i0, std::move(v));
}

} // namespace tsvar
