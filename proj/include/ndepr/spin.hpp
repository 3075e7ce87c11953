#pragma once

#include <cmath>
#include <string>

#include "ndepr/error.hpp"
#include "ndepr/linalg.hpp"

namespace ndepr {

/// Angular-momentum matrices for a single spin, hbar = 1.
/// Basis ordering is m = s, s-1, ..., -s.
struct SpinOps {
  double s = 0.5;
  ComplexMatrix sx, sy, sz;

  std::size_t dim() const { return sz.dim(); }
  ComplexMatrix identity() const { return ComplexMatrix::identity(dim()); }
  ComplexMatrix raising() const { return sx + cplx(0.0, 1.0) * sy; }
};

/// True if 2s is a positive integer (to 1e-12).
inline bool is_half_integer_spin(double s) {
  const double two_s = 2.0 * s;
  return s > 0.0 && std::abs(two_s - std::round(two_s)) < 1e-12;
}

inline SpinOps spin_operators(double s) {
  if (!is_half_integer_spin(s)) {
    throw InvalidInput("spin quantum number must be a positive multiple of 1/2, got " +
                       std::to_string(s));
  }
  const auto n = static_cast<std::size_t>(std::lround(2.0 * s)) + 1;
  SpinOps ops;
  ops.s = 0.5 * static_cast<double>(n - 1);
  ComplexMatrix sp(n);
  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = ops.s - static_cast<double>(i);
  // <m+1| S+ |m> = sqrt(s(s+1) - m(m+1))
  for (std::size_t i = 1; i < n; ++i) {
    sp(i - 1, i) = std::sqrt(ops.s * (ops.s + 1.0) - m[i] * (m[i] + 1.0));
  }
  const ComplexMatrix sm = sp.adjoint();
  ops.sx = (sp + sm) * 0.5;
  ops.sy = (sp - sm) * cplx(0.0, -0.5);
  ops.sz = ComplexMatrix::diagonal(m);
  return ops;
}

}  // namespace ndepr
