#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsvar/errors.hpp"

namespace tsvar {

enum class ScaleKind { exact_isolated, sampled_dense };

// Classification flags of a single scale point. The derived notions follow
// the usual conventions: a point is isolated when scattered on both sides,
// dense when dense on both sides. Endpoints are never right-/left-scattered
// on the closed side (sigma(max) = max, rho(min) = min).
struct PointClass {
    bool right_scattered = false;
    bool left_scattered = false;
    bool right_dense = false;
    bool left_dense = false;

    bool isolated() const { return right_scattered && left_scattered; }
    bool dense() const { return right_dense && left_dense; }
};

// A finite time scale: strictly increasing points plus jump structure.
// Dense model scales (P_{a,b}) are represented by a sampled surrogate and
// tagged sampled_dense with the sampling step recorded; every quantity
// computed here refers to the sampled point set itself.
class TimeScale {
  public:
    TimeScale(std::vector<double> points, ScaleKind kind, double model_step,
              std::string provenance);

    int size() const { return static_cast<int>(pts_.size()); }
    double point(int i) const { return pts_[static_cast<size_t>(i)]; }
    const std::vector<double>& points() const { return pts_; }
    double min() const { return pts_.front(); }
    double max() const { return pts_.back(); }
    ScaleKind kind() const { return kind_; }
    bool sampled() const { return kind_ == ScaleKind::sampled_dense; }
    // Sampling step of the dense model; 0 for exact scales.
    double model_step() const { return model_step_; }
    const std::string& provenance() const { return prov_; }

    // Tolerant point lookup: |t - point| <= 1e-12 * max(1, |t|).
    // Throws input_error when t is not on the scale.
    int index_of(double t) const;
    std::optional<int> try_index_of(double t) const;

    int sigma_index(int i) const { return i + 1 < size() ? i + 1 : i; }
    int rho_index(int i) const { return i > 0 ? i - 1 : 0; }
    double sigma(int i) const { return pts_[static_cast<size_t>(sigma_index(i))]; }
    double rho(int i) const { return pts_[static_cast<size_t>(rho_index(i))]; }
    double mu(int i) const { return sigma(i) - point(i); }
    double nu(int i) const { return point(i) - rho(i); }

    PointClass classify(int i) const;

    // Jump indices of the dense model behind a sampled_dense scale: a gap
    // equal to the sampling step is dense in the model, a larger gap is a
    // genuine jump. On exact scales these coincide with sigma/rho.
    int sigma_model_index(int i) const;
    int rho_model_index(int i) const;

    // Scale-level predicates. On a finite point set every point has a
    // punctured neighbourhood free of other points, and the jump
    // compositions sigma(rho(t)) = t, rho(sigma(t)) = t hold away from the
    // conventional endpoints, so both predicates are computed, not assumed.
    bool is_isolated_scale() const;
    bool is_regular() const;

    // kappa domains as index ranges [lo, hi] inclusive.
    int kappa_hi() const { return size() - 2; }   // T^kappa: drop max
    int kappa_lo() const { return 1; }            // T_kappa: drop min

  private:
    std::vector<double> pts_;
    ScaleKind kind_;
    double model_step_;
    std::string prov_;
};

using TimeScalePtr = std::shared_ptr<const TimeScale>;

// Textual scale specification:
//   points(t0,t1,...) | hZ(h,a,b) | qZ(q,kmin,kmax) | Pab(a,b,cycles,step)
TimeScalePtr build_timescale(const std::string& spec);

TimeScalePtr make_points(std::vector<double> pts);
TimeScalePtr make_hZ(double h, double a, double b);
TimeScalePtr make_qZ(double q, int kmin, int kmax);
TimeScalePtr make_Pab(double a, double b, int cycles, double step);

// Everything jump_data reports about one point.
struct JumpData {
    double sigma = 0, rho = 0, mu = 0, nu = 0;
    PointClass cls;
};

JumpData jump_data(const TimeScale& ts, double t);

struct ScaleProperties {
    bool is_isolated = false;
    bool is_regular = false;
};

ScaleProperties scale_properties(const TimeScale& ts);

// A real value attached to every covered point of a time scale. Results of
// kappa-trimming operations cover a sub-range [lo, hi] of the scale indices
// so that misuse (asking for a derivative at the trimmed point) is caught.
class GridFunction {
  public:
    GridFunction(TimeScalePtr scale, std::vector<double> values);
    GridFunction(TimeScalePtr scale, int lo, std::vector<double> values);

    const TimeScalePtr& scale() const { return ts_; }
    int lo() const { return lo_; }
    int hi() const { return lo_ + static_cast<int>(v_.size()) - 1; }
    int count() const { return static_cast<int>(v_.size()); }
    bool covers(int i) const { return i >= lo_ && i <= hi(); }
    bool full() const { return lo_ == 0 && hi() == ts_->size() - 1; }

    // Value at scale index i; throws input_error outside the domain.
    double operator[](int i) const;
    double& at(int i);

    double max_abs() const;

    static GridFunction constant(TimeScalePtr scale, double c);
    template <typename F>
    static GridFunction sample(TimeScalePtr scale, F&& f) {
        std::vector<double> v;
        v.reserve(static_cast<size_t>(scale->size()));
        for (int i = 0; i < scale->size(); ++i) v.push_back(f(scale->point(i)));
        return GridFunction(std::move(scale), std::move(v));
    }

  private:
    TimeScalePtr ts_;
    int lo_;
    std::vector<double> v_;
};

} // namespace tsvar
