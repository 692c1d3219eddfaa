#pragma once

#include <vector>

namespace evost {

// Right-continuous step function with strictly increasing knots.  Before the
// first knot the value is value_before_first (1.0 for survival curves).
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;
  double value_before_first = 1.0;

  // Value at t: the value attached to the largest knot <= t.
  double operator()(double t) const;
  // Left limit: the value attached to the largest knot strictly below t.
  double left_limit(double t) const;
  // Exact integral over [a, b] (piecewise-constant quadrature).
  double integral(double a, double b) const;
  // Smallest t with value <= 0.5, or +inf when the curve never crosses it.
  double median() const;

  bool operator==(const StepFunction&) const = default;
};

}  // namespace evost
