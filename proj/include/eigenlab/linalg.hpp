// SPDX-License-Identifier: Apache-2.0
//
// Small dense factorisations used by the iteration engine (Householder QR,
// non-pivoted Cholesky) and the cyclic Jacobi eigensolver that serves as the
// independent spectral oracle everywhere else.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "eigenlab/errors.hpp"
#include "eigenlab/matrix.hpp"

namespace eigenlab {

inline constexpr double kSymTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kPivotTol = 1e-13;
inline constexpr double kJacobiTol = 1e-14;
inline constexpr int kJacobiMaxSweeps = 100;

struct QrFactors {
  Matrix q;
  Matrix r;
};

struct CholFactor {
  Matrix l;
};

/// Eigenvalues descending; column i of `eigenvectors` pairs with eigenvalues[i].
struct SpectralDecomp {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// Householder QR with diag(R) >= 0. Columns whose subdiagonal part is already
/// zero get the identity reflector, so diagonal and zero inputs give Q = I.
inline QrFactors qr_decompose(const Matrix& m) {
  const std::size_t n = m.size();
  Matrix a = m;
  Matrix q = Matrix::identity(n);
  std::vector<double> v(n);

  for (std::size_t k = 0; k + 1 < n; ++k) {
    double sigma = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) sigma += a(i, k) * a(i, k);
    if (sigma == 0.0) continue;

    const double x0 = a(k, k);
    const double norm = std::sqrt(x0 * x0 + sigma);
    const double alpha = x0 <= 0.0 ? norm : -norm;
    v[k] = x0 - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
    const double beta = 2.0 / (v[k] * v[k] + sigma);

    for (std::size_t j = k + 1; j < n; ++j) {
      double w = 0.0;
      for (std::size_t i = k; i < n; ++i) w += v[i] * a(i, j);
      w *= beta;
      for (std::size_t i = k; i < n; ++i) a(i, j) -= w * v[i];
    }
    a(k, k) = alpha;
    for (std::size_t i = k + 1; i < n; ++i) a(i, k) = 0.0;

    for (std::size_t r = 0; r < n; ++r) {
      double w = 0.0;
      for (std::size_t i = k; i < n; ++i) w += q(r, i) * v[i];
      w *= beta;
      for (std::size_t i = k; i < n; ++i) q(r, i) -= w * v[i];
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (a(k, k) < 0.0) {
      for (std::size_t j = k; j < n; ++j) a(k, j) = -a(k, j);
      for (std::size_t r = 0; r < n; ++r) q(r, k) = -q(r, k);
    }
  }
  return {std::move(q), std::move(a)};
}

/// Non-pivoted Cholesky. Throws SingularMatrix when a pivot is not safely
/// positive; semi-definite inputs are not completed.
inline CholFactor cholesky(const Matrix& m) {
  const std::size_t n = m.size();
  const double threshold = kPivotTol * scale_of(m);
  Matrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > threshold)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "Cholesky pivot %zu is %.6g (needs > %.3g); matrix is not positive definite",
                    j, d, threshold);
      throw SingularMatrix(buf);
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return {std::move(l)};
}

namespace detail {

inline void fix_eigenvector_signs(Matrix& v) {
  const std::size_t n = v.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, c)) > std::abs(v(best, c))) best = r;
    if (v(best, c) < 0.0)
      for (std::size_t r = 0; r < n; ++r) v(r, c) = -v(r, c);
  }
}

}  // namespace detail

/// Cyclic Jacobi eigensolver for symmetric input.
inline SpectralDecomp jacobi_eigen(const Matrix& m) {
  const std::size_t n = m.size();
  Matrix a = symmetrized(m);
  Matrix v = Matrix::identity(n);
  const double threshold = kJacobiTol * scale_of(m);

  int sweep = 0;
  while (offdiag_norm(a) > threshold) {
    if (sweep++ == kJacobiMaxSweeps) {
      throw NoConvergence("Jacobi eigensolver did not converge in " + std::to_string(kJacobiMaxSweeps) +
                          " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SpectralDecomp out{std::vector<double>(n), Matrix(n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.eigenvalues[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
  }
  detail::fix_eigenvector_signs(out.eigenvectors);
  return out;
}

inline std::vector<double> eigenvalues_of(const Matrix& m) { return jacobi_eigen(m).eigenvalues; }

/// Throws ValidationError unless `m` is finite, non-empty and symmetric.
inline void require_symmetric(const Matrix& m) {
  if (m.empty()) throw ValidationError("matrix is empty (n must be >= 1)");
  if (!all_finite(m)) throw ValidationError("matrix has non-finite entries");
  const double tol = kSymTol * scale_of(m);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "matrix is not symmetric: entry (%zu,%zu)=%.17g but (%zu,%zu)=%.17g", i, j,
                      m(i, j), j, i, m(j, i));
        throw ValidationError(buf);
      }
}

/// Symmetric positive semi-definite matrix. Constructed either through
/// `validated` (checks symmetry and the spectrum) or `unchecked` for values the
/// engine produces from an already valid input.
class SymPsdMatrix {
 public:
  SymPsdMatrix() = default;

  static SymPsdMatrix validated(Matrix m) {
    require_symmetric(m);
    const double lmin = eigenvalues_of(m).back();
    if (lmin < -kPsdTol * scale_of(m)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "matrix is not positive semi-definite: smallest eigenvalue %.17g", lmin);
      throw ValidationError(buf);
    }
    return SymPsdMatrix(std::move(m));
  }

  static SymPsdMatrix unchecked(Matrix m) { return SymPsdMatrix(std::move(m)); }

  const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }  // NOLINT(google-explicit-constructor)
  std::size_t size() const noexcept { return m_.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }

  friend bool operator==(const SymPsdMatrix&, const SymPsdMatrix&) = default;

 private:
  explicit SymPsdMatrix(Matrix m) : m_(std::move(m)) {}
  Matrix m_;
};

}  // namespace eigenlab
