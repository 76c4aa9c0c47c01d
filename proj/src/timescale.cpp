#include "tsvar/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tsvar {

namespace {

double membership_tol(double t) { return 1e-12 * std::max(1.0, std::fabs(t)); }

std::string fmt_point(double t) {
    std::ostringstream os;
    os.precision(17);
    os << t;
    return os.str();
}

} // namespace

TimeScale::TimeScale(std::vector<double> points, ScaleKind kind, double model_step,
                     std::string provenance)
    : pts_(std::move(points)), kind_(kind), model_step_(model_step), prov_(std::move(provenance)) {
    if (pts_.size() < 2)
        throw input_error("time scale needs at least 2 points, got " +
                          std::to_string(pts_.size()) + " (" + prov_ + ")");
    for (size_t i = 0; i < pts_.size(); ++i) {
        if (!std::isfinite(pts_[i]))
            throw input_error("time scale contains a non-finite point (" + prov_ + ")");
        if (i > 0 && pts_[i] - pts_[i - 1] <= membership_tol(pts_[i]))
            throw input_error("time scale points must be strictly increasing: ..." +
                              fmt_point(pts_[i - 1]) + ", " + fmt_point(pts_[i]) + "... (" +
                              prov_ + ")");
    }
}

std::optional<int> TimeScale::try_index_of(double t) const {
    auto it = std::lower_bound(pts_.begin(), pts_.end(), t - membership_tol(t));
    if (it == pts_.end()) return std::nullopt;
    if (std::fabs(*it - t) <= membership_tol(t))
        return static_cast<int>(it - pts_.begin());
    return std::nullopt;
}

int TimeScale::index_of(double t) const {
    if (auto i = try_index_of(t)) return *i;
    throw input_error("point " + fmt_point(t) + " is not on the time scale (" + prov_ + ")");
}

PointClass TimeScale::classify(int i) const {
    PointClass c;
    c.right_scattered = sigma(i) > point(i);
    c.left_scattered = rho(i) < point(i);
    // right-dense needs t < max with sigma(t) = t; on a finite set that never
    // happens, and endpoints are excluded by definition.
    c.right_dense = (i + 1 < size()) && !c.right_scattered;
    c.left_dense = (i > 0) && !c.left_scattered;
    return c;
}

int TimeScale::sigma_model_index(int i) const {
    if (kind_ == ScaleKind::exact_isolated) return sigma_index(i);
    if (i + 1 >= size()) return i;
    return mu(i) <= model_step_ * (1.0 + 1e-9) ? i : i + 1;
}

int TimeScale::rho_model_index(int i) const {
    if (kind_ == ScaleKind::exact_isolated) return rho_index(i);
    if (i == 0) return 0;
    return nu(i) <= model_step_ * (1.0 + 1e-9) ? i : i - 1;
}

bool TimeScale::is_isolated_scale() const {
    // Finite-set interpretation: every point has a punctured neighbourhood
    // meeting the scale only in itself, i.e. all gaps are positive. The
    // constructor already rejects non-increasing points.
    for (int i = 0; i + 1 < size(); ++i)
        if (point(i + 1) <= point(i)) return false;
    return true;
}

bool TimeScale::is_regular() const {
    // sigma(rho(t)) = t checked away from min (rho(min) = min is the inf
    // convention, not a jump), rho(sigma(t)) = t away from max.
    for (int i = 1; i < size(); ++i)
        if (sigma_index(rho_index(i)) != i) return false;
    for (int i = 0; i + 1 < size(); ++i)
        if (rho_index(sigma_index(i)) != i) return false;
    return true;
}

TimeScalePtr make_points(std::vector<double> pts) {
    std::ostringstream os;
    os << "points(";
    os.precision(17);
    for (size_t i = 0; i < pts.size(); ++i) os << (i ? "," : "") << pts[i];
    os << ")";
    return std::make_shared<TimeScale>(std::move(pts), ScaleKind::exact_isolated, 0.0, os.str());
}

TimeScalePtr make_hZ(double h, double a, double b) {
    std::ostringstream os;
    os.precision(17);
    os << "hZ(" << h << "," << a << "," << b << ")";
    if (!(h > 0)) throw input_error("hZ step must be positive: " + os.str());
    if (!(a < b)) throw input_error("hZ needs a < b: " + os.str());
    double span = (b - a) / h;
    double n = std::round(span);
    if (std::fabs(span - n) > 1e-9 * std::max(1.0, span))
        throw input_error("hZ span (b-a)/h is not an integer: " + os.str());
    std::vector<double> pts;
    int m = static_cast<int>(n);
    pts.reserve(static_cast<size_t>(m) + 1);
    for (int i = 0; i < m; ++i) pts.push_back(a + i * h);
    pts.push_back(b); // land exactly on b
    return std::make_shared<TimeScale>(std::move(pts), ScaleKind::exact_isolated, 0.0, os.str());
}

TimeScalePtr make_qZ(double q, int kmin, int kmax) {
    std::ostringstream os;
    os.precision(17);
    os << "qZ(" << q << "," << kmin << "," << kmax << ")";
    if (!(q > 1)) throw input_error("qZ needs q > 1: " + os.str());
    if (kmin > kmax) throw input_error("qZ needs kmin <= kmax: " + os.str());
    std::vector<double> pts;
    pts.reserve(static_cast<size_t>(kmax - kmin) + 1);
    for (int k = kmin; k <= kmax; ++k) pts.push_back(std::pow(q, k));
    return std::make_shared<TimeScale>(std::move(pts), ScaleKind::exact_isolated, 0.0, os.str());
}

TimeScalePtr make_Pab(double a, double b, int cycles, double step) {
    std::ostringstream os;
    os.precision(17);
    os << "Pab(" << a << "," << b << "," << cycles << "," << step << ")";
    if (!(a > 0) || !(b > 0)) throw input_error("Pab needs a > 0 and b > 0: " + os.str());
    if (cycles < 1) throw input_error("Pab needs cycles >= 1: " + os.str());
    if (!(step > 0)) throw input_error("Pab sample step must be positive: " + os.str());
    double m = a / step;
    double mr = std::round(m);
    if (mr < 1 || std::fabs(m - mr) > 1e-9 * std::max(1.0, m))
        throw input_error("Pab block length a must be an integer multiple of the step: " + os.str());
    int per_block = static_cast<int>(mr);
    std::vector<double> pts;
    pts.reserve(static_cast<size_t>(cycles) * (static_cast<size_t>(per_block) + 1));
    for (int k = 0; k < cycles; ++k) {
        double base = k * (a + b);
        for (int j = 0; j < per_block; ++j) pts.push_back(base + j * step);
        pts.push_back(base + a);
    }
    return std::make_shared<TimeScale>(std::move(pts), ScaleKind::sampled_dense, step, os.str());
}

namespace {

// Tiny parser for the ScaleSpec grammar: name(number, number, ...).
struct SpecParser {
    const std::string& s;
    size_t pos = 0;

    explicit SpecParser(const std::string& text) : s(text) {}

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    std::string ident() {
        skip_ws();
        size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
            ++pos;
        if (start == pos)
            throw input_error("scale spec: expected a name at column " +
                              std::to_string(start + 1) + " in '" + s + "'");
        return s.substr(start, pos - start);
    }

    void expect(char c) {
        skip_ws();
        if (pos >= s.size() || s[pos] != c)
            throw input_error(std::string("scale spec: expected '") + c + "' at column " +
                              std::to_string(pos + 1) + " in '" + s + "'");
        ++pos;
    }

    std::vector<double> number_list() {
        std::vector<double> out;
        expect('(');
        for (;;) {
            skip_ws();
            size_t start = pos;
            char* end = nullptr;
            double v = std::strtod(s.c_str() + pos, &end);
            if (end == s.c_str() + pos)
                throw input_error("scale spec: expected a number at column " +
                                  std::to_string(start + 1) + " in '" + s + "'");
            pos = static_cast<size_t>(end - s.c_str());
            out.push_back(v);
            skip_ws();
            if (pos < s.size() && s[pos] == ',') {
                ++pos;
                continue;
            }
            expect(')');
            break;
        }
        skip_ws();
        if (pos != s.size())
            throw input_error("scale spec: trailing input at column " + std::to_string(pos + 1) +
                              " in '" + s + "'");
        return out;
    }
};

int as_int(double v, const std::string& what, const std::string& spec) {
    double r = std::round(v);
    if (std::fabs(v - r) > 1e-9)
        throw input_error("scale spec: " + what + " must be an integer in '" + spec + "'");
    return static_cast<int>(r);
}

} // namespace

TimeScalePtr build_timescale(const std::string& spec) {
    SpecParser p(spec);
    std::string name = p.ident();
    std::vector<double> args = p.number_list();
    if (name == "points") {
        if (args.size() < 2)
            throw input_error("scale spec: points(...) needs at least 2 points in '" + spec + "'");
        return make_points(std::move(args));
    }
    if (name == "hZ") {
        if (args.size() != 3)
            throw input_error("scale spec: hZ takes (h, a, b) in '" + spec + "'");
        return make_hZ(args[0], args[1], args[2]);
    }
    if (name == "qZ") {
        if (args.size() != 3)
            throw input_error("scale spec: qZ takes (q, kmin, kmax) in '" + spec + "'");
        return make_qZ(args[0], as_int(args[1], "kmin", spec), as_int(args[2], "kmax", spec));
    }
    if (name == "Pab") {
        if (args.size() != 4)
            throw input_error("scale spec: Pab takes (a, b, cycles, step) in '" + spec + "'");
        return make_Pab(args[0], args[1], as_int(args[2], "cycles", spec), args[3]);
    }
    throw input_error("scale spec: unknown scale kind '" + name + "' in '" + spec + "'");
}

JumpData jump_data(const TimeScale& ts, double t) {
    int i = ts.index_of(t);
    JumpData d;
    d.sigma = ts.sigma(i);
    d.rho = ts.rho(i);
    d.mu = ts.mu(i);
    d.nu = ts.nu(i);
    d.cls = ts.classify(i);
    return d;
}

ScaleProperties scale_properties(const TimeScale& ts) {
    return ScaleProperties{ts.is_isolated_scale(), ts.is_regular()};
}

GridFunction::GridFunction(TimeScalePtr scale, std::vector<double> values)
    : GridFunction(std::move(scale), 0, std::move(values)) {
    if (!full())
        throw input_error("grid function must carry one value per scale point (" +
                          std::to_string(count()) + " values for " +
                          std::to_string(ts_->size()) + " points); use the (scale, lo, values) "
                          "constructor for a trimmed domain");
}

GridFunction::GridFunction(TimeScalePtr scale, int lo, std::vector<double> values)
    : ts_(std::move(scale)), lo_(lo), v_(std::move(values)) {
    if (!ts_) throw input_error("grid function needs a time scale");
    if (v_.empty()) throw input_error("grid function needs at least one value");
    if (lo_ < 0 || hi() >= ts_->size())
        throw input_error("grid function domain [" + std::to_string(lo_) + ", " +
                          std::to_string(hi()) + "] exceeds the scale (" +
                          std::to_string(ts_->size()) + " points)");
    for (double x : v_)
        if (!std::isfinite(x)) throw input_error("grid function values must be finite");
}

double GridFunction::operator[](int i) const {
    if (!covers(i))
        throw input_error("grid function evaluated at scale index " + std::to_string(i) +
                          " outside its domain [" + std::to_string(lo_) + ", " +
                          std::to_string(hi()) + "]");
    return v_[static_cast<size_t>(i - lo_)];
}

double& GridFunction::at(int i) {
    if (!covers(i))
        throw input_error("grid function index " + std::to_string(i) + " outside domain");
    return v_[static_cast<size_t>(i - lo_)];
}

double GridFunction::max_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::fabs(x));
    return m;
}

GridFunction GridFunction::constant(TimeScalePtr scale, double c) {
    std::vector<double> v(static_cast<size_t>(scale->size()), c);
    return GridFunction(std::move(scale), std::move(v));
}

} // namespace tsvar
