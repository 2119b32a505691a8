#ifndef PCDC_NN_PROB_HPP_
#define PCDC_NN_PROB_HPP_

#include <cmath>

namespace pcdc::nn {

// Probability mass of a zero-located Laplace(scale) on the interval
// [lo, hi]. Evaluated in the tail that keeps the subtraction well conditioned.
inline double laplace_interval_mass(double lo, double hi, double scale) {
  if (lo >= 0.0) return 0.5 * (std::exp(-lo / scale) - std::exp(-hi / scale));
  if (hi <= 0.0) return 0.5 * (std::exp(hi / scale) - std::exp(lo / scale));
  return 1.0 - 0.5 * std::exp(lo / scale) - 0.5 * std::exp(-hi / scale);
}

// Laplace density at t (location 0).
inline double laplace_density(double t, double scale) {
  return std::exp(-std::fabs(t) / scale) / (2.0 * scale);
}

inline double laplace_cdf(double t, double scale) {
  return t < 0.0 ? 0.5 * std::exp(t / scale) : 1.0 - 0.5 * std::exp(-t / scale);
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace pcdc::nn

#endif  // PCDC_NN_PROB_HPP_
