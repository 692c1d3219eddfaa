#include "evost/xor_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evost/common.hpp"
#include "evost/rng.hpp"

namespace evost {

bool xor_indicator_f0(double x0, double x1) { return x0 * x0 + x1 * x1 <= 0.6; }
bool xor_indicator_f1(double x0, double x1) { return x0 * x1 <= 0.0; }
bool xor_rule(double x0, double x1) {
  return xor_indicator_f0(x0, x1) != xor_indicator_f1(x0, x1);
}

double calibrate_censoring(std::span<const double> event_times, double target_rate) {
  if (target_rate < 0.0 || target_rate >= 1.0) {
    throw GeneratorError("censoring rate must be in [0,1)");
  }
  if (target_rate == 0.0) return std::numeric_limits<double>::infinity();
  if (event_times.empty()) throw GeneratorError("cannot calibrate censoring on empty group");

  // Expected censoring rate P(C < T) with C ~ U(0, U): mean of min(T, U)/U.
  // Decreasing in U, from 1 at U -> 0 towards 0, so bisection always lands.
  auto rate_at = [&](double u) {
    double acc = 0.0;
    for (double t : event_times) acc += std::min(t, u) / u;
    return acc / static_cast<double>(event_times.size());
  };

  double lo = 0.0;  // rate 1 in the limit
  double hi = *std::max_element(event_times.begin(), event_times.end());
  int guard = 0;
  while (rate_at(hi) > target_rate) {
    hi *= 2.0;
    if (++guard > 200) throw GeneratorError("censoring calibration failed to bracket target");
  }
  double mid = hi;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    double r = rate_at(mid);
    if (std::abs(r - target_rate) <= 1e-3) return mid;
    (r > target_rate ? lo : hi) = mid;
  }
  throw GeneratorError("censoring calibration did not converge");
}

XorData generate_xor_survival(const XorParams& params) {
  if (params.n < 2) throw GeneratorError("need n >= 2");
  if (params.scale_exp <= 0.0 || params.scale_gamma <= 0.0 || params.shape_gamma <= 0.0) {
    throw GeneratorError("distribution parameters must be positive");
  }

  XorData out;
  size_t n = params.n;
  std::vector<double> x0(n), x1(n);
  out.groups.resize(n);
  out.gamma_group.resize(n);
  out.event_times.resize(n);
  out.censor_times.resize(n);

  Rng coords = Rng::stream(params.seed, "xor.coords");
  for (size_t i = 0; i < n; ++i) {
    x0[i] = coords.uniform(-1.0, 1.0);
    x1[i] = coords.uniform(-1.0, 1.0);
    bool f0 = xor_indicator_f0(x0[i], x1[i]);
    bool f1 = xor_indicator_f1(x0[i], x1[i]);
    out.groups[i] = 2 * (f0 ? 1 : 0) + (f1 ? 1 : 0);
    out.gamma_group[i] = (f0 != f1) ? 1 : 0;
  }

  Rng event_rng = Rng::stream(params.seed, "xor.event");
  std::vector<double> exp_draws, gamma_draws;
  for (size_t i = 0; i < n; ++i) {
    double t = out.gamma_group[i] ? event_rng.gamma(params.shape_gamma, params.scale_gamma)
                                  : event_rng.exponential(params.scale_exp);
    out.event_times[i] = t;
    (out.gamma_group[i] ? gamma_draws : exp_draws).push_back(t);
  }
  if (exp_draws.empty() || gamma_draws.empty()) {
    throw GeneratorError("one distribution group is empty; increase n");
  }

  out.censor_bounds.first = calibrate_censoring(exp_draws, params.censor_rates.first);
  out.censor_bounds.second = calibrate_censoring(gamma_draws, params.censor_rates.second);

  Rng censor_rng = Rng::stream(params.seed, "xor.censor");
  std::vector<double> observed(n);
  std::vector<uint8_t> events(n);
  for (size_t i = 0; i < n; ++i) {
    double u = censor_rng.uniform01();  // consumed even when the bound is infinite
    double bound = out.gamma_group[i] ? out.censor_bounds.second : out.censor_bounds.first;
    double c = std::isinf(bound) ? std::numeric_limits<double>::infinity() : u * bound;
    out.censor_times[i] = c;
    events[i] = out.event_times[i] <= c ? 1 : 0;
    observed[i] = std::min(out.event_times[i], c);
  }

  out.dataset = SurvivalDataset::create({"x0", "x1"}, {std::move(x0), std::move(x1)},
                                        std::move(observed), std::move(events));
  return out;
}

}  // namespace evost
