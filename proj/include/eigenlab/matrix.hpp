// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "eigenlab/errors.hpp"

namespace eigenlab {

/// Dense square matrix of doubles, row-major. A 0x0 matrix is permitted only
/// as the empty active block of a fully deflated iteration.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> d) {
    Matrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
  static Matrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) {
        throw DimensionMismatch("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                                " entries, expected " + std::to_string(rows.size()));
      }
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.n_));
    }
    return m;
  }
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<std::vector<double>> v;
    for (const auto& r : rows) v.emplace_back(r);
    return from_rows(v);
  }

  std::size_t size() const noexcept { return n_; }
  bool empty() const noexcept { return n_ == 0; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size()) throw DimensionMismatch("matrix product of mismatched sizes");
  const std::size_t n = a.size();
  Matrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix operator+(Matrix a, const Matrix& b) {
  if (a.size() != b.size()) throw DimensionMismatch("matrix sum of mismatched sizes");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] += bv[i];
  return a;
}

inline Matrix operator-(Matrix a, const Matrix& b) {
  if (a.size() != b.size()) throw DimensionMismatch("matrix difference of mismatched sizes");
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) av[i] -= bv[i];
  return a;
}

inline Matrix operator*(double s, Matrix a) {
  for (double& x : a.values()) x *= s;
  return a;
}

/// a + shift * I
inline Matrix add_identity(Matrix a, double shift) {
  for (std::size_t i = 0; i < a.size(); ++i) a(i, i) += shift;
  return a;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.values()) s += x * x;
  return std::sqrt(s);
}

/// Frobenius norm of the part strictly off the diagonal.
inline double offdiag_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

/// Norm of the off-diagonal entries of row i (the deflation test quantity).
inline double row_offdiag_norm(const Matrix& a, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j)
    if (j != i) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.values()) m = std::max(m, std::abs(x));
  return m;
}

/// max(1, largest |entry|): the reference magnitude for every relative tolerance.
inline double scale_of(const Matrix& a) { return std::max(1.0, max_abs(a)); }

inline bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](double x) { return std::isfinite(x); });
}

inline bool is_diagonal(const Matrix& a, double tol = 0.0) { return offdiag_norm(a) <= tol; }

inline std::vector<double> diagonal_of(const Matrix& a) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a(i, i);
  return d;
}

/// Leading m x m block.
inline Matrix leading_block(const Matrix& a, std::size_t m) {
  Matrix b(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) b(i, j) = a(i, j);
  return b;
}

/// (a + aᵀ) / 2
inline Matrix symmetrized(const Matrix& a) {
  Matrix s(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    s(i, i) = a(i, i);
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

/// 2D rotation R(theta) = [[cos, -sin], [sin, cos]].
inline Matrix rotation2(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return Matrix::from_rows({{c, -s}, {s, c}});
}

/// R(theta) * diag(d1, d2) * R(theta)ᵀ, symmetrized.
inline Matrix rotated_diag2(double d1, double d2, double theta) {
  const Matrix r = rotation2(theta);
  return symmetrized(r * Matrix::diagonal({d1, d2}) * transpose(r));
}

}  // namespace eigenlab
