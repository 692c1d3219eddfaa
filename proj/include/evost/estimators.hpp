#pragma once

#include <cstdint>
#include <span>

#include "evost/step_function.hpp"

namespace evost {

// Product-limit estimator.  Knots sit at distinct event times; censored
// observations leave the risk set after their time.  Ties at one time are
// processed together, with same-time censorings still counted at risk.
StepFunction kaplan_meier(std::span<const double> times, std::span<const uint8_t> events);

// Censoring survival G(t): Kaplan-Meier with the event indicator flipped.
StepFunction censoring_survival(std::span<const double> times, std::span<const uint8_t> events);

struct LogRankSums {
  double observed_a = 0.0;  // events in group A
  double expected_a = 0.0;  // hypergeometric expectation
  double variance = 0.0;
};

LogRankSums logrank_sums(std::span<const double> times_a, std::span<const uint8_t> events_a,
                         std::span<const double> times_b, std::span<const uint8_t> events_b);

struct LogRankResult {
  double statistic = 0.0;  // (O_A - E_A)^2 / V, 0 when V == 0
  double p_value = 1.0;    // chi-squared survival, 1 d.o.f.
};

LogRankResult logrank_two_sample(std::span<const double> times_a,
                                 std::span<const uint8_t> events_a,
                                 std::span<const double> times_b,
                                 std::span<const uint8_t> events_b);

// Regularized lower incomplete gamma P(a, x), local implementation (series +
// continued fraction), absolute accuracy well below 1e-10 in the chi-squared
// range used here.
double regularized_gamma_p(double a, double x);

// Survival function of the chi-squared distribution with 1 d.o.f.
double chi_squared_sf_1df(double x);

}  // namespace evost
