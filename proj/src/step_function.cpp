#include "evost/step_function.hpp"

#include <algorithm>
#include <limits>

namespace evost {

double StepFunction::operator()(double t) const {
  // First knot > t, then step back one.
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return value_before_first;
  return values[static_cast<size_t>(it - knots.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return value_before_first;
  return values[static_cast<size_t>(it - knots.begin()) - 1];
}

double StepFunction::integral(double a, double b) const {
  if (b <= a) return 0.0;
  double total = 0.0;
  double cursor = a;
  double current = (*this)(a);
  auto it = std::upper_bound(knots.begin(), knots.end(), a);
  for (; it != knots.end() && *it < b; ++it) {
    total += current * (*it - cursor);
    cursor = *it;
    current = values[static_cast<size_t>(it - knots.begin())];
  }
  total += current * (b - cursor);
  return total;
}

double StepFunction::median() const {
  if (value_before_first <= 0.5) return -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < knots.size(); ++i) {
    if (values[i] <= 0.5) return knots[i];
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace evost
