#pragma once

#include <vector>

#include "cadsig/cad_lang.hpp"

namespace cadsig {

/// Circle through an arc's three defining points plus the signed sweep from
/// start to end passing through mid (positive = counter-clockwise).
struct ArcGeometry {
  Vec2 center;
  double radius = 0.0;
  double start_angle = 0.0;
  double sweep = 0.0;
  bool degenerate = true;
};

ArcGeometry arc_geometry(const Arc& arc);
bool arc_contains_angle(const ArcGeometry& g, double angle);

/// Polyline approximation with chordal error <= tolerance. Includes both endpoints.
std::vector<Vec2> tessellate_arc(const Arc& arc, double tolerance);
/// Closed polygon (no repeated first vertex), counter-clockwise.
std::vector<Vec2> tessellate_circle(const Circle& circle, double tolerance);

}  // namespace cadsig
