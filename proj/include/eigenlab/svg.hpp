// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eigenlab/ellipse.hpp"

namespace eigenlab {

/// One ellipse (n = 2) or ellipsoid (n = 3) drawn into a frame.
struct Overlay {
  std::string label;
  std::string color;
  Matrix matrix;
};

inline constexpr std::string_view kInputColor = "#0000ff";
inline constexpr std::string_view kQrColor = "#ff0000";
inline constexpr std::string_view kLrColor = "#008000";

inline Overlay overlay_from_view(const EllipseView2D& v, std::string label, std::string color) {
  return {std::move(label), std::move(color), rotated_diag2(v.a, v.b, v.theta)};
}

namespace detail {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Fixed isometric projection: x down-right, y down-left, z up.
inline Point isometric(double x, double y, double z) {
  const double c = std::cos(std::numbers::pi / 6);
  const double s = std::sin(std::numbers::pi / 6);
  return {(x - y) * c, z - (x + y) * s};
}

inline constexpr int kOutlineSamples = 96;

struct Shape {
  std::vector<Point> outline;                       // closed
  std::vector<std::pair<Point, Point>> axis_lines;  // principal semi-axes (3D)
};

inline Shape shape_2d(const Matrix& m) {
  Shape s;
  for (int i = 0; i < kOutlineSamples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kOutlineSamples;
    const double c = std::cos(t);
    const double sn = std::sin(t);
    s.outline.push_back({m(0, 0) * c + m(0, 1) * sn, m(1, 0) * c + m(1, 1) * sn});
  }
  return s;
}

inline Shape shape_3d(const Matrix& m) {
  // The projection P of {Mv} is the ellipse with shape matrix (PM)(PM)ᵀ.
  Matrix pm(3);
  for (std::size_t j = 0; j < 3; ++j) {
    const Point p = isometric(m(0, j), m(1, j), m(2, j));
    pm(0, j) = p.x;
    pm(1, j) = p.y;
  }
  Matrix a(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 3; ++k) a(i, j) += pm(i, k) * pm(j, k);
  const EllipseView2D v = to_ellipse2d(a);
  const double ra = std::sqrt(v.a);
  const double rb = std::sqrt(v.b);
  const double ct = std::cos(v.theta);
  const double st = std::sin(v.theta);

  Shape s;
  for (int i = 0; i < kOutlineSamples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kOutlineSamples;
    const double u = ra * std::cos(t);
    const double w = rb * std::sin(t);
    s.outline.push_back({ct * u - st * w, st * u + ct * w});
  }
  const EllipsoidView e = to_ellipsoid(m);
  for (std::size_t i = 0; i < 3; ++i) {
    const double len = e.axes[i];
    const Point tip = isometric(len * e.orientation(0, i), len * e.orientation(1, i), len * e.orientation(2, i));
    s.axis_lines.push_back({{-tip.x, -tip.y}, tip});
  }
  return s;
}

}  // namespace detail

/// Standalone SVG 1.1 frame: coordinate axes, one closed path per overlay and
/// a legend. The canvas scales to the largest extent over all overlays.
/// Output bytes depend only on the inputs.
inline std::string render_svg_frame(std::span<const Overlay> overlays, std::string_view title = {}) {
  if (overlays.empty()) throw ValidationError("render_svg_frame needs at least one overlay");
  const std::size_t n = overlays.front().matrix.size();
  for (const auto& o : overlays) {
    if (o.matrix.size() != n) throw DimensionMismatch("overlays of different dimensions");
  }
  if (n != 2 && n != 3) throw DimensionMismatch("unrenderable dimension n = " + std::to_string(n));

  std::vector<detail::Shape> shapes;
  double extent = 0.0;
  for (const auto& o : overlays) {
    shapes.push_back(n == 2 ? detail::shape_2d(o.matrix) : detail::shape_3d(o.matrix));
    for (const auto& p : shapes.back().outline) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
    for (const auto& [p, q] : shapes.back().axis_lines)
      extent = std::max({extent, std::abs(p.x), std::abs(p.y), std::abs(q.x), std::abs(q.y)});
  }
  if (!(extent > 0.0)) extent = 1.0;

  constexpr double kSize = 420.0;
  constexpr double kCentre = kSize / 2;
  constexpr double kRadius = 180.0;
  const double scale = kRadius / extent;
  auto sx = [&](double x) { return detail::fmt_num(kCentre + scale * x); };
  auto sy = [&](double y) { return detail::fmt_num(kCentre - scale * y); };
  using detail::fmt_num;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"420\" height=\"420\" "
         "viewBox=\"0 0 420 420\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"420\" height=\"420\" fill=\"#ffffff\"/>\n";

  svg += "<g stroke=\"#808080\" stroke-width=\"1\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#808080\">\n";
  if (n == 2) {
    svg += "<line x1=\"" + fmt_num(kCentre - kRadius - 15) + "\" y1=\"" + fmt_num(kCentre) + "\" x2=\"" +
           fmt_num(kCentre + kRadius + 15) + "\" y2=\"" + fmt_num(kCentre) + "\"/>\n";
    svg += "<line x1=\"" + fmt_num(kCentre) + "\" y1=\"" + fmt_num(kCentre + kRadius + 15) + "\" x2=\"" +
           fmt_num(kCentre) + "\" y2=\"" + fmt_num(kCentre - kRadius - 15) + "\"/>\n";
    svg += "<text x=\"" + fmt_num(kCentre + kRadius + 2) + "\" y=\"" + fmt_num(kCentre - 4) + "\" stroke=\"none\">x</text>\n";
    svg += "<text x=\"" + fmt_num(kCentre + 4) + "\" y=\"" + fmt_num(kCentre - kRadius - 4) + "\" stroke=\"none\">y</text>\n";
  } else {
    const char* names[] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) {
      const detail::Point tip = detail::isometric(i == 0, i == 1, i == 2);
      const double len = kRadius + 15;
      svg += "<line x1=\"" + fmt_num(kCentre - len * tip.x) + "\" y1=\"" + fmt_num(kCentre + len * tip.y) + "\" x2=\"" +
             fmt_num(kCentre + len * tip.x) + "\" y2=\"" + fmt_num(kCentre - len * tip.y) + "\"/>\n";
      svg += "<text x=\"" + fmt_num(kCentre + len * tip.x + 3) + "\" y=\"" + fmt_num(kCentre - len * tip.y - 3) +
             "\" stroke=\"none\">" + names[i] + "</text>\n";
    }
  }
  svg += "</g>\n";

  for (std::size_t i = 0; i < overlays.size(); ++i) {
    const auto& o = overlays[i];
    const auto& s = shapes[i];
    const std::string color = detail::xml_escape(o.color);
    std::string d;
    for (std::size_t p = 0; p < s.outline.size(); ++p) {
      d += p == 0 ? "M" : " L";
      d += sx(s.outline[p].x) + "," + sy(s.outline[p].y);
    }
    d += " Z";
    svg += "<path class=\"overlay\" data-label=\"" + detail::xml_escape(o.label) + "\" d=\"" + d +
           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    for (const auto& [p, q] : s.axis_lines) {
      svg += "<line x1=\"" + sx(p.x) + "\" y1=\"" + sy(p.y) + "\" x2=\"" + sx(q.x) + "\" y2=\"" + sy(q.y) +
             "\" stroke=\"" + color + "\" stroke-width=\"1\" stroke-dasharray=\"4,3\"/>\n";
    }
  }

  svg += "<g font-family=\"sans-serif\" font-size=\"13\">\n";
  double y = 20.0;
  if (!title.empty()) {
    svg += "<text x=\"10\" y=\"" + fmt_num(y) + "\" fill=\"#000000\">" + detail::xml_escape(title) + "</text>\n";
    y += 18.0;
  }
  for (const auto& o : overlays) {
    const std::string color = detail::xml_escape(o.color);
    svg += "<line x1=\"10\" y1=\"" + fmt_num(y - 4) + "\" x2=\"30\" y2=\"" + fmt_num(y - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"36\" y=\"" + fmt_num(y) + "\" fill=\"" + color + "\">" + detail::xml_escape(o.label) +
           "</text>\n";
    y += 18.0;
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

inline std::string render_svg_frame(const std::vector<Overlay>& overlays, std::string_view title = {}) {
  return render_svg_frame(std::span<const Overlay>(overlays), title);
}

}  // namespace eigenlab
