#include "cadsig/arc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cadsig {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_positive(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0 ? a + kTwoPi : a;
}

int segments_for(double radius, double sweep, double tolerance) {
  if (radius <= tolerance) return std::max(4, static_cast<int>(std::ceil(sweep / (std::numbers::pi / 2))));
  const double max_step = 2.0 * std::acos(1.0 - tolerance / radius);
  const int n = static_cast<int>(std::ceil(std::abs(sweep) / max_step));
  return std::clamp(n, 2, 1024);
}

}  // namespace

ArcGeometry arc_geometry(const Arc& arc) {
  ArcGeometry g;
  const double ax = arc.start.x, ay = arc.start.y;
  const double bx = arc.mid.x, by = arc.mid.y;
  const double cx = arc.end.x, cy = arc.end.y;
  const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const double span = std::max({std::hypot(bx - ax, by - ay), std::hypot(cx - bx, cy - by),
                                std::hypot(cx - ax, cy - ay)});
  if (span < 1e-12 || std::abs(d) < 1e-12 * span * span) return g;
  const double a2 = ax * ax + ay * ay;
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  g.center.x = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
  g.center.y = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
  g.radius = std::hypot(ax - g.center.x, ay - g.center.y);
  g.start_angle = std::atan2(ay - g.center.y, ax - g.center.x);
  const double to_mid = wrap_positive(std::atan2(by - g.center.y, bx - g.center.x) - g.start_angle);
  const double to_end = wrap_positive(std::atan2(cy - g.center.y, cx - g.center.x) - g.start_angle);
  g.sweep = to_mid < to_end ? to_end : -(kTwoPi - to_end);
  g.degenerate = false;
  return g;
}

bool arc_contains_angle(const ArcGeometry& g, double angle) {
  const double rel = wrap_positive(angle - g.start_angle);
  if (g.sweep >= 0) return rel <= g.sweep;
  return rel == 0.0 || rel >= kTwoPi + g.sweep;
}

std::vector<Vec2> tessellate_arc(const Arc& arc, double tolerance) {
  const ArcGeometry g = arc_geometry(arc);
  if (g.degenerate) return {arc.start, arc.end};
  const int n = segments_for(g.radius, g.sweep, tolerance);
  std::vector<Vec2> pts;
  pts.reserve(n + 1);
  pts.push_back(arc.start);
  for (int i = 1; i < n; ++i) {
    const double a = g.start_angle + g.sweep * i / n;
    pts.push_back({g.center.x + g.radius * std::cos(a), g.center.y + g.radius * std::sin(a)});
  }
  pts.push_back(arc.end);
  return pts;
}

std::vector<Vec2> tessellate_circle(const Circle& circle, double tolerance) {
  const double r = std::hypot(circle.top.x - circle.center.x, circle.top.y - circle.center.y);
  const int n = std::max(8, segments_for(r, kTwoPi, tolerance));
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double a = std::numbers::pi / 2 + kTwoPi * i / n;
    pts.push_back({circle.center.x + r * std::cos(a), circle.center.y + r * std::sin(a)});
  }
  return pts;
}

}  // namespace cadsig
