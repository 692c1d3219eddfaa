#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evost/step_function.hpp"

namespace evost {

struct SurvSpan {
  std::span<const double> times;
  std::span<const uint8_t> events;
  size_t size() const { return times.size(); }
};

// Inverse-probability-of-censoring-weighted Brier score at time t.
//   observed events up to t   ->  S_i(t)^2        / G(T_i-)
//   still at risk after t     -> (1 - S_i(t))^2   / G(t)
//   censored before t         ->  0
// G(T_i-) is the left limit of the censoring survival curve.  A zero weight
// attached to a contributing patient raises UndefinedWeightError.
double brier_score_at(std::span<const StepFunction> predicted, SurvSpan test,
                      const StepFunction& censor_g, double t);

// Trapezoidal integral of the Brier score over the distinct test times,
// normalized by the covered span; a single grid point degenerates to the
// score at that point.  Strict variant: any test time outside the training
// event-time range raises RangeError.  G comes from the training cohort.
double integrated_brier(std::span<const StepFunction> predicted, SurvSpan train, SurvSpan test);

// Tree predictions share a handful of leaf curves; exploiting that makes the
// score linear in the grid instead of grid x patients.  This context is
// reusable across models scored on the same (train, test) pair.  Grid points
// falling outside the training event-time range, or where G vanishes, are
// dropped (clipped_low/clipped_high report it); an empty residual grid raises
// RangeError.
class GroupedBrierContext {
 public:
  GroupedBrierContext(SurvSpan train, SurvSpan test);

  // curve_of[i] indexes curves, in original test-row order.
  double integrated(std::span<const StepFunction> curves,
                    std::span<const uint32_t> curve_of) const;

  const StepFunction& censor_curve() const { return g_; }
  std::pair<double, double> train_event_range() const { return event_range_; }
  size_t grid_size() const { return grid_.size(); }
  bool clipped_low() const { return clipped_low_; }
  bool clipped_high() const { return clipped_high_; }

 private:
  StepFunction g_;
  std::pair<double, double> event_range_;
  std::vector<double> grid_;
  std::vector<double> g_at_grid_;
  std::vector<uint32_t> order_;        // test rows sorted by time
  std::vector<double> event_weight_;   // 1/G(T_i-) for events, else 0
  std::vector<double> times_;
  std::vector<uint8_t> events_;
  bool clipped_low_ = false;
  bool clipped_high_ = false;
};

// Harrell's concordance: pairs (i, j) with T_i < T_j and delta_i = 1;
// risk_i > risk_j counts 1, equal risks count 1/2.  Returns 1/2 when no
// comparable pair exists.
double concordance_index(std::span<const double> risks, SurvSpan data);

// Mean after dropping floor(n/4) smallest and largest values.
double interquartile_mean(std::span<const double> values);

struct ObjectivePoint {
  double ibs = 0.0;
  long long complexity = 0;

  bool operator==(const ObjectivePoint&) const = default;
};

inline bool weakly_dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return a.ibs <= b.ibs && a.complexity <= b.complexity;
}
inline bool strictly_dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  return weakly_dominates(a, b) && (a.ibs < b.ibs || a.complexity < b.complexity);
}

// 2-D dominated hypervolume against the reference point (rectangle sweep,
// both objectives minimized).  Points outside the reference box raise
// RangeError.  Dominated or duplicate points contribute nothing.
double hypervolume_2d(std::span<const ObjectivePoint> front, const ObjectivePoint& reference);

// Empirical attainment surface: per complexity value, the smallest ibs
// weakly dominated by at least ceil(level * R) of the R run fronts, reduced
// to its non-dominated subset.
std::vector<ObjectivePoint> attainment_surface(
    const std::vector<std::vector<ObjectivePoint>>& fronts, double level);

struct BootstrapCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Mean plus 2.5%/97.5% percentiles (linear interpolation) of a statistic
// sample, typically produced by bootstrap resampling.
BootstrapCi bootstrap_ci(std::span<const double> values);

// Linear-interpolation percentile of a sorted sample, p in [0, 100].
double percentile_sorted(std::span<const double> sorted, double p);

}  // namespace evost
