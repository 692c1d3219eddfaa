#include "evost/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace evost {

namespace {

// (time, event) pairs sorted by time.
std::vector<std::pair<double, uint8_t>> sorted_pairs(std::span<const double> times,
                                                     std::span<const uint8_t> events) {
  std::vector<std::pair<double, uint8_t>> v(times.size());
  for (size_t i = 0; i < times.size(); ++i) v[i] = {times[i], events[i]};
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return v;
}

}  // namespace

StepFunction kaplan_meier(std::span<const double> times, std::span<const uint8_t> events) {
  auto obs = sorted_pairs(times, events);
  StepFunction f;
  double s = 1.0;
  size_t at_risk = obs.size();
  size_t i = 0;
  while (i < obs.size()) {
    double t = obs[i].first;
    size_t d = 0, tied = 0;
    while (i < obs.size() && obs[i].first == t) {
      d += obs[i].second ? 1u : 0u;
      ++tied;
      ++i;
    }
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      f.knots.push_back(t);
      f.values.push_back(s);
    }
    at_risk -= tied;
  }
  return f;
}

StepFunction censoring_survival(std::span<const double> times,
                                std::span<const uint8_t> events) {
  std::vector<uint8_t> flipped(events.size());
  for (size_t i = 0; i < events.size(); ++i) flipped[i] = events[i] ? 0 : 1;
  return kaplan_meier(times, flipped);
}

LogRankSums logrank_sums(std::span<const double> times_a, std::span<const uint8_t> events_a,
                         std::span<const double> times_b,
                         std::span<const uint8_t> events_b) {
  auto a = sorted_pairs(times_a, events_a);
  auto b = sorted_pairs(times_b, events_b);
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  LogRankSums sums;
  size_t ia = 0, ib = 0;
  while (ia < a.size() || ib < b.size()) {
    double t;
    if (ib == b.size() || (ia < a.size() && a[ia].first <= b[ib].first)) {
      t = a[ia].first;
    } else {
      t = b[ib].first;
    }
    double da = 0, ca = 0, db = 0, cb = 0;
    while (ia < a.size() && a[ia].first == t) {
      (a[ia].second ? da : ca) += 1;
      ++ia;
    }
    while (ib < b.size() && b[ib].first == t) {
      (b[ib].second ? db : cb) += 1;
      ++ib;
    }
    double d = da + db;
    double n = na + nb;
    if (d > 0) {
      sums.observed_a += da;
      sums.expected_a += d * na / n;
      if (n > 1.0) {
        sums.variance += d * (na / n) * (1.0 - na / n) * (n - d) / (n - 1.0);
      }
    }
    na -= da + ca;
    nb -= db + cb;
  }
  return sums;
}

LogRankResult logrank_two_sample(std::span<const double> times_a,
                                 std::span<const uint8_t> events_a,
                                 std::span<const double> times_b,
                                 std::span<const uint8_t> events_b) {
  LogRankSums s = logrank_sums(times_a, events_a, times_b, events_b);
  LogRankResult r;
  if (s.variance > 0.0) {
    double diff = s.observed_a - s.expected_a;
    r.statistic = diff * diff / s.variance;
    r.p_value = chi_squared_sf_1df(r.statistic);
  }
  return r;
}

namespace {

// Series expansion, converges fast for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), reliable for x >= a + 1.
double gamma_q_cf(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi_squared_sf_1df(double x) {
  if (x <= 0.0) return 1.0;
  double a = 0.5, hx = 0.5 * x;
  if (hx < a + 1.0) return 1.0 - gamma_p_series(a, hx);
  return gamma_q_cf(a, hx);
}

}  // namespace evost
