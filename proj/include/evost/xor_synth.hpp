#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evost/dataset.hpp"

namespace evost {

// Two-covariate synthetic problem: covariates uniform on [-1,1]^2, the event
// distribution selected by (x0^2 + x1^2 <= 0.6) XOR (x0*x1 <= 0).  XOR true
// draws from Gamma(shape, scale), false from Exponential(scale).  Censoring is
// uniform per distribution with the upper bound calibrated to hit the target
// censoring rate.
struct XorParams {
  size_t n = 10000;
  uint64_t seed = 0;
  double scale_exp = 1.0;
  double shape_gamma = 2.0;
  double scale_gamma = 1.0;
  // (exponential group, gamma group)
  std::pair<double, double> censor_rates{0.20, 0.10};
};

struct XorData {
  SurvivalDataset dataset;              // covariates x0, x1; observed time; event flag
  std::vector<int> groups;              // 2*[x0^2+x1^2<=0.6] + [x0*x1<=0]
  std::vector<uint8_t> gamma_group;     // XOR value per patient
  std::vector<double> event_times;      // raw event-distribution draws
  std::vector<double> censor_times;     // +inf when the group is uncensored
  std::pair<double, double> censor_bounds{0.0, 0.0};  // calibrated U per group
};

bool xor_indicator_f0(double x0, double x1);  // x0^2 + x1^2 <= 0.6
bool xor_indicator_f1(double x0, double x1);  // x0*x1 <= 0
bool xor_rule(double x0, double x1);

// Upper bound U of Uniform(0, U) censoring such that the expected censoring
// rate over the given event-time sample matches target within 1e-3 (bisection).
// target 0 returns +inf (no censoring).
double calibrate_censoring(std::span<const double> event_times, double target_rate);

XorData generate_xor_survival(const XorParams& params);

}  // namespace evost
