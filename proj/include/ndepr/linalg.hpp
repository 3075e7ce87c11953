#pragma once

// Small dense complex linear algebra: a square matrix type, Kronecker
// products, and a Jacobi eigensolver for Hermitian matrices. Dimensions
// here never exceed ~100, so everything is plain O(n^3) on a flat buffer.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

#include "ndepr/error.hpp"

namespace ndepr {

using cplx = std::complex<double>;

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t dim) : dim_(dim), a_(dim * dim) {}

  static ComplexMatrix identity(std::size_t dim) {
    ComplexMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix diagonal(const std::vector<double>& d) {
    ComplexMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t dim() const { return dim_; }

  cplx& operator()(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

  cplx* data() { return a_.data(); }
  const cplx* data() const { return a_.data(); }

  ComplexMatrix adjoint() const {
    ComplexMatrix r(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& x : a_) s += std::norm(x);
    return std::sqrt(s);
  }

  /// Largest elementwise modulus.
  double max_abs() const {
    double m = 0.0;
    for (const auto& x : a_) m = std::max(m, std::abs(x));
    return m;
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    check_same(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
    return *this;
  }
  ComplexMatrix& operator*=(cplx s) {
    for (auto& x : a_) x *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(ComplexMatrix a, double s) { return a *= cplx(s); }
  friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= cplx(s); }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    a.check_same(b);
    const std::size_t n = a.dim_;
    ComplexMatrix r(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        const cplx aik = a(i, k);
        if (aik == cplx(0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) r(i, j) += aik * b(k, j);
      }
    return r;
  }

  /// Applies the matrix to a column vector.
  std::vector<cplx> apply(const std::vector<cplx>& v) const {
    std::vector<cplx> r(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) r[i] += (*this)(i, j) * v[j];
    return r;
  }

  std::vector<cplx> column(std::size_t j) const {
    std::vector<cplx> c(dim_);
    for (std::size_t i = 0; i < dim_; ++i) c[i] = (*this)(i, j);
    return c;
  }

 private:
  void check_same(const ComplexMatrix& o) const {
    if (o.dim_ != dim_) {
      throw InvalidInput("matrix dimension mismatch: " + std::to_string(dim_) + " vs " +
                         std::to_string(o.dim_));
    }
  }

  std::size_t dim_ = 0;
  std::vector<cplx> a_;
};

/// Tensor product; the left factor indexes the slow (outer) block.
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t na = a.dim(), nb = b.dim();
  ComplexMatrix r(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      const cplx aij = a(i, j);
      if (aij == cplx(0.0)) continue;
      for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = 0; l < nb; ++l) r(i * nb + k, j * nb + l) = aij * b(k, l);
    }
  return r;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  return a * b - b * a;
}

/// <u|A|v>
inline cplx matrix_element(const std::vector<cplx>& u, const ComplexMatrix& a,
                           const std::vector<cplx>& v) {
  const auto av = a.apply(v);
  cplx s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * av[i];
  return s;
}

inline double hermiticity_residual(const ComplexMatrix& h) {
  return (h - h.adjoint()).frobenius_norm();
}

struct EigenSystem {
  std::vector<double> values;  // ascending
  ComplexMatrix vectors;       // column k pairs with values[k]
};

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Throws InvalidInput when ||H - H^dagger|| exceeds
/// `hermitian_rtol * ||H||`.
inline EigenSystem eigh(const ComplexMatrix& h, double hermitian_rtol = 1e-10) {
  const std::size_t n = h.dim();
  const double scale = h.frobenius_norm();
  const double residual = hermiticity_residual(h);
  if (residual > hermitian_rtol * std::max(scale, 1e-300)) {
    std::ostringstream msg;
    msg << "eigh: matrix is not Hermitian (||H - H^dagger|| = " << residual
        << ", ||H|| = " << scale << ")";
    throw InvalidInput(msg.str());
  }

  ComplexMatrix a = (h + h.adjoint()) * 0.5;
  ComplexMatrix v = ComplexMatrix::identity(n);
  if (scale == 0.0 || n < 2) {
    std::vector<double> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = a(i, i).real();
    return {vals, v};
  }

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double r = std::abs(apq);
        if (r <= 1e-300) continue;
        const cplx ph = apq / r;  // e^{i phi}
        const cplx e = std::conj(ph);
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * r);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // A <- A U with U = diag-phase(q) * real rotation(p, q).
        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * e * akq;
          a(k, q) = s * akp + c * e * akq;
        }
        // A <- U^dagger A
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * ph * aqk;
          a(q, k) = s * apk + c * ph * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * e * vkq;
          v(k, q) = s * vkp + c * e * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });
  EigenSystem out{std::vector<double>(n), ComplexMatrix(n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// max_k ||H v_k - lambda_k v_k||
inline double eigen_residual(const ComplexMatrix& h, const EigenSystem& es) {
  double worst = 0.0;
  for (std::size_t k = 0; k < es.values.size(); ++k) {
    const auto vk = es.vectors.column(k);
    const auto hv = h.apply(vk);
    double s = 0.0;
    for (std::size_t i = 0; i < vk.size(); ++i) s += std::norm(hv[i] - es.values[k] * vk[i]);
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

/// Spectral norm of a Hermitian matrix.
inline double hermitian_norm(const ComplexMatrix& h) {
  if (h.dim() == 0) return 0.0;
  const auto es = eigh(h, 1e-8);
  return std::max(std::abs(es.values.front()), std::abs(es.values.back()));
}

}  // namespace ndepr
