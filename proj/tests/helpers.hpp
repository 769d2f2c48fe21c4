#pragma once

// Small hand-built programs shared by the unit tests.

#include <algorithm>
#include <vector>

#include "cadsig/cad_lang.hpp"

namespace cadsig::testing {

inline Loop rect_loop(double x0, double y0, double x1, double y1) {
  Loop l;
  l.curves = {Line{{x0, y0}, {x1, y0}}, Line{{x1, y0}, {x1, y1}}, Line{{x1, y1}, {x0, y1}},
              Line{{x0, y1}, {x0, y0}}};
  return l;
}

inline Sketch single_loop_sketch(Loop l) {
  Sketch s;
  s.faces.push_back(Face{{std::move(l)}});
  return s;
}

/// Axis-aligned box [x0,x1]x[y0,y1]x[z0,z1] as one extrusion of a rectangle drawn
/// in the unit sketch box (sigma spans the larger planar side).
inline DesignStep box_step(double x0, double y0, double z0, double x1, double y1, double z1,
                           BooleanOp op = BooleanOp::New) {
  const double sigma = std::max(x1 - x0, y1 - y0);
  DesignStep st;
  st.extrusion.tau = {x0, y0, z0};
  st.extrusion.sigma = sigma;
  st.extrusion.d_plus = z1 - z0;
  st.extrusion.op = op;
  st.sketch = single_loop_sketch(rect_loop(0.0, 0.0, (x1 - x0) / sigma, (y1 - y0) / sigma));
  return st;
}

inline CadProgram unit_cube() { return CadProgram{{box_step(0, 0, 0, 1, 1, 1)}}; }

inline CadProgram cube_with_centered_cut() {
  return CadProgram{{box_step(0, 0, 0, 1, 1, 1), box_step(0.25, 0.25, 0.25, 0.75, 0.75, 0.75, BooleanOp::Cut)}};
}

}  // namespace cadsig::testing
