#pragma once

#include <cmath>
#include <string>

#include "ndepr/error.hpp"

namespace ndepr {

/// Bessel function of the first kind J_m(x) for integer order m >= 0.
///
/// Ascending power series sum_k (-1)^k (x/2)^{2k+m} / (k! (k+m)!), summed in
/// extended precision and stopped once past the largest term with
/// |term| < 1e-16 |sum|. Intended for |x| <= 20, where the cancellation
/// loss stays below 1e-12 absolute in long double.
inline double bessel_j(int m, double x) {
  if (m < 0) throw InvalidInput("bessel_j: order must be non-negative, got " + std::to_string(m));
  const long double half = static_cast<long double>(x) / 2.0L;
  long double term = 1.0L;
  for (int k = 1; k <= m; ++k) term *= half / static_cast<long double>(k);
  long double sum = term;
  const long double q = -half * half;
  for (int k = 1; k < 1000; ++k) {
    term *= q / (static_cast<long double>(k) * static_cast<long double>(k + m));
    sum += term;
    const bool past_peak = static_cast<long double>(k) > std::fabs(half);
    if (past_peak && std::fabs(term) <= 1e-16L * std::fabs(sum)) break;
    if (sum == 0.0L && term == 0.0L) break;
  }
  return static_cast<double>(sum);
}

}  // namespace ndepr
