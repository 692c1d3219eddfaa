#include "evost/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evost/common.hpp"
#include "evost/estimators.hpp"

namespace evost {

double brier_score_at(std::span<const StepFunction> predicted, SurvSpan test,
                      const StepFunction& censor_g, double t) {
  size_t n = test.size();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double ti = test.times[i];
    if (ti <= t && test.events[i]) {
      double w = censor_g.left_limit(ti);
      if (w <= 0.0) throw UndefinedWeightError("censoring weight vanished before event time");
      double s = predicted[i](t);
      acc += s * s / w;
    } else if (ti > t) {
      double w = censor_g(t);
      if (w <= 0.0) throw UndefinedWeightError("censoring weight vanished at evaluation time");
      double s = predicted[i](t);
      acc += (1.0 - s) * (1.0 - s) / w;
    }
  }
  return acc / static_cast<double>(n);
}

namespace {

std::vector<double> distinct_sorted_times(SurvSpan test) {
  std::vector<double> grid(test.times.begin(), test.times.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double trapezoid(const std::vector<double>& grid, const std::vector<double>& bs) {
  if (grid.size() == 1) return bs[0];
  double integral = 0.0;
  for (size_t i = 0; i + 1 < grid.size(); ++i) {
    integral += 0.5 * (bs[i] + bs[i + 1]) * (grid[i + 1] - grid[i]);
  }
  return integral / (grid.back() - grid.front());
}

}  // namespace

double integrated_brier(std::span<const StepFunction> predicted, SurvSpan train,
                        SurvSpan test) {
  std::vector<double> train_events;
  for (size_t i = 0; i < train.size(); ++i) {
    if (train.events[i]) train_events.push_back(train.times[i]);
  }
  if (train_events.empty()) throw RangeError("training cohort has no events");
  auto [lo, hi] = std::minmax_element(train_events.begin(), train_events.end());

  auto grid = distinct_sorted_times(test);
  if (grid.front() < *lo || grid.back() > *hi) {
    throw RangeError("test times outside the training event-time range");
  }

  StepFunction g = censoring_survival(train.times, train.events);
  std::vector<double> bs(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    bs[i] = brier_score_at(predicted, test, g, grid[i]);
  }
  return trapezoid(grid, bs);
}

GroupedBrierContext::GroupedBrierContext(SurvSpan train, SurvSpan test) {
  std::vector<double> train_events;
  for (size_t i = 0; i < train.size(); ++i) {
    if (train.events[i]) train_events.push_back(train.times[i]);
  }
  if (train_events.empty()) throw RangeError("training cohort has no events");
  auto [lo_it, hi_it] = std::minmax_element(train_events.begin(), train_events.end());
  event_range_ = {*lo_it, *hi_it};

  g_ = censoring_survival(train.times, train.events);

  auto grid = distinct_sorted_times(test);
  for (double t : grid) {
    if (t < event_range_.first) {
      clipped_low_ = true;
    } else if (t > event_range_.second) {
      clipped_high_ = true;
    } else if (g_(t) <= 0.0) {
      clipped_high_ = true;  // G vanishes on a suffix of the time axis
    } else {
      grid_.push_back(t);
    }
  }
  if (grid_.empty()) throw RangeError("no usable evaluation times for this split");

  g_at_grid_.resize(grid_.size());
  for (size_t i = 0; i < grid_.size(); ++i) g_at_grid_[i] = g_(grid_[i]);

  times_.assign(test.times.begin(), test.times.end());
  events_.assign(test.events.begin(), test.events.end());
  order_.resize(times_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](uint32_t a, uint32_t b) { return times_[a] < times_[b]; });
  event_weight_.assign(times_.size(), 0.0);
  double grid_max = grid_.back();
  for (size_t i = 0; i < times_.size(); ++i) {
    if (!events_[i] || times_[i] > grid_max) continue;
    // G is non-increasing, so G(T-) >= G(grid_max) > 0 here.
    event_weight_[i] = 1.0 / g_.left_limit(times_[i]);
  }
}

double GroupedBrierContext::integrated(std::span<const StepFunction> curves,
                                       std::span<const uint32_t> curve_of) const {
  size_t n_curves = curves.size();
  size_t n = times_.size();
  std::vector<double> event_acc(n_curves, 0.0);   // sum of weights, events with T <= t
  std::vector<double> at_risk(n_curves, 0.0);     // count with T > t
  std::vector<size_t> knot_pos(n_curves, 0);
  std::vector<double> curve_val(n_curves);
  for (size_t c = 0; c < n_curves; ++c) {
    curve_val[c] = curves[c].value_before_first;
    at_risk[c] = 0.0;
  }
  for (size_t i = 0; i < n; ++i) at_risk[curve_of[i]] += 1.0;

  std::vector<double> bs(grid_.size());
  size_t p = 0;
  for (size_t j = 0; j < grid_.size(); ++j) {
    double t = grid_[j];
    while (p < n && times_[order_[p]] <= t) {
      uint32_t i = order_[p];
      uint32_t c = curve_of[i];
      at_risk[c] -= 1.0;
      if (events_[i]) event_acc[c] += event_weight_[i];
      ++p;
    }
    double inv_g = 1.0 / g_at_grid_[j];
    double acc = 0.0;
    for (size_t c = 0; c < n_curves; ++c) {
      const StepFunction& f = curves[c];
      while (knot_pos[c] < f.knots.size() && f.knots[knot_pos[c]] <= t) {
        curve_val[c] = f.values[knot_pos[c]];
        ++knot_pos[c];
      }
      double s = curve_val[c];
      acc += s * s * event_acc[c] + (1.0 - s) * (1.0 - s) * at_risk[c] * inv_g;
    }
    bs[j] = acc / static_cast<double>(n);
  }
  return trapezoid(grid_, bs);
}

namespace {

// Fenwick tree over risk ranks.
class Bit {
 public:
  explicit Bit(size_t n) : tree_(n + 1, 0.0) {}
  void add(size_t i, double v) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += v;
  }
  double prefix(size_t i) const {  // sum of [0, i)
    double s = 0.0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<double> tree_;
};

}  // namespace

double concordance_index(std::span<const double> risks, SurvSpan data) {
  size_t n = data.size();
  std::vector<double> sorted_risks(risks.begin(), risks.end());
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()), sorted_risks.end());
  auto rank_of = [&](double r) {
    return static_cast<size_t>(
        std::lower_bound(sorted_risks.begin(), sorted_risks.end(), r) - sorted_risks.begin());
  };

  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return data.times[a] < data.times[b]; });

  Bit bit(sorted_risks.size());
  double concordant = 0.0, tied = 0.0, pairs = 0.0;
  double seen = 0.0;
  // Walk time groups from the largest time down; the tree holds risks of
  // patients with strictly larger observed time.
  size_t i = n;
  while (i > 0) {
    size_t j = i;
    double t = data.times[order[i - 1]];
    while (j > 0 && data.times[order[j - 1]] == t) --j;
    for (size_t k = j; k < i; ++k) {
      uint32_t idx = order[k];
      if (!data.events[idx]) continue;
      size_t r = rank_of(risks[idx]);
      pairs += seen;
      // Concordant: later-surviving patient has lower risk.
      concordant += bit.prefix(r);
      tied += bit.prefix(r + 1) - bit.prefix(r);
    }
    for (size_t k = j; k < i; ++k) {
      bit.add(rank_of(risks[order[k]]), 1.0);
      seen += 1.0;
    }
    i = j;
  }
  if (pairs == 0.0) return 0.5;
  return (concordant + 0.5 * tied) / pairs;
}

double interquartile_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("interquartile_mean of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  size_t drop = v.size() / 4;
  double acc = 0.0;
  for (size_t i = drop; i < v.size() - drop; ++i) acc += v[i];
  return acc / static_cast<double>(v.size() - 2 * drop);
}

double hypervolume_2d(std::span<const ObjectivePoint> front, const ObjectivePoint& reference) {
  if (front.empty()) return 0.0;
  std::vector<ObjectivePoint> pts(front.begin(), front.end());
  for (const auto& p : pts) {
    if (p.ibs > reference.ibs || p.complexity > reference.complexity) {
      throw RangeError("front point lies beyond the reference point");
    }
  }
  std::sort(pts.begin(), pts.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
    if (a.ibs != b.ibs) return a.ibs < b.ibs;
    return a.complexity < b.complexity;
  });
  double hv = 0.0;
  long long prev_c = reference.complexity;
  for (const auto& p : pts) {
    if (p.complexity >= prev_c) continue;  // dominated or duplicate, no area
    hv += (reference.ibs - p.ibs) * static_cast<double>(prev_c - p.complexity);
    prev_c = p.complexity;
  }
  return hv;
}

std::vector<ObjectivePoint> attainment_surface(
    const std::vector<std::vector<ObjectivePoint>>& fronts, double level) {
  if (fronts.empty()) throw ConfigError("attainment surface needs at least one front");
  if (!(level > 0.0 && level <= 1.0)) throw ConfigError("attainment level must be in (0,1]");
  size_t runs = fronts.size();
  size_t need = static_cast<size_t>(
      std::ceil(level * static_cast<double>(runs)) + 0.0);
  if (need == 0) need = 1;

  // Per run: complexity-sorted points with running-min ibs.
  struct RunProfile {
    std::vector<long long> complexity;
    std::vector<double> best_ibs;
  };
  std::vector<RunProfile> profiles(runs);
  std::vector<long long> grid;
  for (size_t r = 0; r < runs; ++r) {
    auto pts = fronts[r];
    std::sort(pts.begin(), pts.end(), [](const ObjectivePoint& a, const ObjectivePoint& b) {
      if (a.complexity != b.complexity) return a.complexity < b.complexity;
      return a.ibs < b.ibs;
    });
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
      best = std::min(best, p.ibs);
      if (!profiles[r].complexity.empty() && profiles[r].complexity.back() == p.complexity) {
        profiles[r].best_ibs.back() = best;
      } else {
        profiles[r].complexity.push_back(p.complexity);
        profiles[r].best_ibs.push_back(best);
      }
      grid.push_back(p.complexity);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<ObjectivePoint> surface;
  std::vector<double> bests(runs);
  for (long long c : grid) {
    for (size_t r = 0; r < runs; ++r) {
      const auto& prof = profiles[r];
      auto it = std::upper_bound(prof.complexity.begin(), prof.complexity.end(), c);
      bests[r] = it == prof.complexity.begin()
                     ? std::numeric_limits<double>::infinity()
                     : prof.best_ibs[static_cast<size_t>(it - prof.complexity.begin()) - 1];
    }
    std::sort(bests.begin(), bests.end());
    double attained = bests[need - 1];
    if (std::isinf(attained)) continue;
    if (!surface.empty() && attained >= surface.back().ibs) continue;  // dominated
    surface.push_back({attained, c});
  }
  return surface;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  double h = p / 100.0 * static_cast<double>(sorted.size() - 1);
  double fl = std::floor(h);
  size_t lo = static_cast<size_t>(fl);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - fl) * (sorted[hi] - sorted[lo]);
}

BootstrapCi bootstrap_ci(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("bootstrap_ci of empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BootstrapCi ci;
  ci.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  ci.lo = percentile_sorted(v, 2.5);
  ci.hi = percentile_sorted(v, 97.5);
  return ci;
}

}  // namespace evost
