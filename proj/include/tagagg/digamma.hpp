#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tagagg {

// Digamma (psi) function for positive arguments.
//
// Shifts x above 10 with psi(x) = psi(x + 1) - 1/x, then applies the
// asymptotic expansion
//
//   psi(x) ~ ln x - 1/(2x) - sum_k B_2k / (2k x^2k)
//
// truncated after the x^-14 term. At x >= 10 the truncation error is below
// 1e-17, so accuracy is set by the recurrence sum (a few ulp).
inline double digamma(double x) {
  if (!(x > 0.0) || std::isinf(x)) {
    if (x == std::numeric_limits<double>::infinity()) return x;
    throw std::domain_error("digamma: argument must be positive, got " + std::to_string(x));
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Horner form of the Bernoulli tail in 1/x^2.
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return shift + std::log(x) - 0.5 * inv - tail;
}

}  // namespace tagagg
