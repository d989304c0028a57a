// SPDX-License-Identifier: Apache-2.0
//
// A PSD matrix M corresponds to the origin-centred ellipsoid {Mv : |v| = 1}:
// semi-axis lengths are the eigenvalues, semi-axis directions the
// eigenvectors. These views are what the explorer and the renderer draw.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "eigenlab/linalg.hpp"

namespace eigenlab {

/// |m12| at or below this (times scale) counts as numerically diagonal.
inline constexpr double kAngleZeroTol = 1e-14;

struct EllipseView2D {
  double a = 0.0;      // major semi-axis
  double b = 0.0;      // minor semi-axis
  double theta = 0.0;  // major-axis angle in (-pi/2, pi/2]
  int quadrant_sign = 0;
};

struct EllipsoidView {
  std::vector<double> axes;  // descending
  Matrix orientation;        // column i is the direction of axes[i]
};

enum class EccentricityClass { Circle, Generic, Pancake };

inline std::string to_string(EccentricityClass c) {
  switch (c) {
    case EccentricityClass::Circle: return "Circle";
    case EccentricityClass::Pancake: return "Pancake";
    case EccentricityClass::Generic: break;
  }
  return "Generic";
}

struct AlignmentMetrics {
  double offdiag_norm = 0.0;
  double axis_ratio = 1.0;
  EccentricityClass eccentricity = EccentricityClass::Generic;
};

/// Major-axis angle of a 2x2 symmetric matrix, folded into (-pi/2, pi/2].
/// Numerically diagonal input snaps to 0 (x-axis major, or a circle) or to
/// pi/2 (y-axis major).
inline double major_axis_angle(const Matrix& m) {
  if (m.size() != 2) throw DimensionMismatch("major_axis_angle needs a 2x2 matrix");
  const double m12 = 0.5 * (m(0, 1) + m(1, 0));
  if (std::abs(m12) <= kAngleZeroTol * scale_of(m)) {
    return m(1, 1) > m(0, 0) ? std::numbers::pi / 2 : 0.0;
  }
  return 0.5 * std::atan2(2.0 * m12, m(0, 0) - m(1, 1));
}

inline EllipseView2D to_ellipse2d(const Matrix& m) {
  if (m.size() != 2) throw DimensionMismatch("to_ellipse2d needs n = 2, got n = " + std::to_string(m.size()));
  const double m12 = 0.5 * (m(0, 1) + m(1, 0));
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double half_gap = 0.5 * (m(0, 0) - m(1, 1));
  const double radius = std::hypot(half_gap, m12);

  EllipseView2D v;
  v.a = mean + radius;
  v.b = std::max(0.0, mean - radius);
  v.theta = major_axis_angle(m);
  if (std::abs(m12) > kAngleZeroTol * scale_of(m)) v.quadrant_sign = m12 > 0.0 ? 1 : -1;
  return v;
}

inline EllipsoidView to_ellipsoid(const Matrix& m) {
  auto sd = jacobi_eigen(m);
  for (double& x : sd.eigenvalues) x = std::max(0.0, x);
  return {std::move(sd.eigenvalues), std::move(sd.eigenvectors)};
}

inline AlignmentMetrics alignment_metrics(const Matrix& m) {
  AlignmentMetrics out;
  out.offdiag_norm = offdiag_norm(m);
  const auto ev = eigenvalues_of(m);
  const double lmax = std::max(0.0, ev.front());
  const double lmin = std::max(0.0, ev.back());
  out.axis_ratio = lmax > 0.0 ? std::clamp(lmin / lmax, 0.0, 1.0) : 1.0;
  if (out.axis_ratio > 0.99) {
    out.eccentricity = EccentricityClass::Circle;
  } else if (out.axis_ratio < 0.01) {
    out.eccentricity = EccentricityClass::Pancake;
  }
  return out;
}

}  // namespace eigenlab
