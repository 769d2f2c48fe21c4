#include "cadsig/geom.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "cadsig/arc.hpp"
#include "cadsig/program_io.hpp"

namespace cadsig {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr double kBoxTolerance = 1e-9;

double polygon_signed_area(const Region2D::Polygon& poly) {
  double twice = 0.0;
  for (size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    twice += a.x * b.y - a.y * b.x;
  }
  return 0.5 * twice;
}

bool polygon_contains(const Region2D::Polygon& poly, double x, double y) {
  bool inside = false;
  for (size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > y) != (b.y > y)) {
      const double xc = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
      if (x < xc) inside = !inside;
    }
  }
  return inside;
}

Region2D::Polygon loop_polygon(const Loop& loop, double tolerance) {
  Region2D::Polygon poly;
  for (const Curve& c : loop.curves) {
    std::visit(
        [&](const auto& cv) {
          using C = std::decay_t<decltype(cv)>;
          if constexpr (std::is_same_v<C, Line>) {
            poly.push_back(cv.start);
          } else if constexpr (std::is_same_v<C, Arc>) {
            const auto pts = tessellate_arc(cv, tolerance);
            poly.insert(poly.end(), pts.begin(), pts.end() - 1);
          } else {
            const auto pts = tessellate_circle(cv, tolerance);
            poly.insert(poly.end(), pts.begin(), pts.end());
          }
        },
        c);
  }
  return poly;
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string where(size_t step, size_t face, size_t loop) {
  return " (step " + std::to_string(step + 1) + ", face " + std::to_string(face) + ", loop " +
         std::to_string(loop) + ")";
}

std::optional<std::string> curve_problem(const Curve& c) {
  constexpr double kMin = 0.5 * kQuantum;
  return std::visit(
      [&](const auto& cv) -> std::optional<std::string> {
        using C = std::decay_t<decltype(cv)>;
        if constexpr (std::is_same_v<C, Line>) {
          if (dist(cv.start, cv.end) < kMin) return "degenerate curve";
        } else if constexpr (std::is_same_v<C, Arc>) {
          if (dist(cv.start, cv.end) < kMin || dist(cv.start, cv.mid) < kMin ||
              dist(cv.mid, cv.end) < kMin || arc_geometry(cv).degenerate) {
            return "degenerate curve";
          }
        } else {
          if (dist(cv.center, cv.top) < kMin) return "degenerate curve";
        }
        return std::nullopt;
      },
      c);
}

}  // namespace

Eigen::Matrix3d euler_to_rotation(double theta, double phi, double gamma) {
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(phi, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

Pose Pose::from(const ExtrusionOp& e) {
  Pose p;
  p.rotation = euler_to_rotation(e.euler[0], e.euler[1], e.euler[2]);
  p.tau = Eigen::Vector3d(e.tau[0], e.tau[1], e.tau[2]);
  p.sigma = e.sigma;
  return p;
}

Eigen::Matrix3d project_unit_bbox(const ExtrusionOp& e) {
  if (!(e.sigma > 0)) throw DomainError("project_unit_bbox: sketch scale must be positive");
  const Pose pose = Pose::from(e);
  Eigen::Matrix3d unit;
  unit.col(0) = Eigen::Vector3d(0, 0, 0);
  unit.col(1) = Eigen::Vector3d(0, 1, 0);
  unit.col(2) = Eigen::Vector3d(1, 0, 0);
  Eigen::Matrix3d out = pose.rotation * (unit * e.sigma);
  out.colwise() += pose.tau;
  return out;
}

bool in_sketch_box(const Eigen::Vector3d& p, const Pose& pose, double margin) {
  const Eigen::Vector3d q = pose.to_plane(p);
  const double x = q.x() / pose.sigma;
  const double y = q.y() / pose.sigma;
  return x >= -kBoxTolerance && x <= 1.0 + kBoxTolerance && y >= -kBoxTolerance &&
         y <= 1.0 + kBoxTolerance && std::abs(q.z()) <= margin + kBoxTolerance;
}

SketchInstance extract_sketch_instance(const Points& cloud, const ExtrusionOp& e, double margin) {
  SketchInstance inst;
  inst.margin = margin;
  if (!(e.sigma > 0)) return inst;
  inst.corners = project_unit_bbox(e);
  const Pose pose = Pose::from(e);
  for (int i = 0; i < cloud.rows(); ++i) {
    if (in_sketch_box(cloud.row(i).transpose(), pose, margin)) inst.indices.push_back(i);
  }
  return inst;
}

SketchInstance extract_sketch_instance(const Points& cloud, const ExtrusionOp& e) {
  return extract_sketch_instance(cloud, e, instance_margin(e));
}

// ---------------------------------------------------------------------------

bool Region2D::FaceRegion::contains(double x, double y) const {
  if (x < lo.x || x > hi.x || y < lo.y || y > hi.y) return false;
  bool inside = false;
  for (const Polygon& p : loops) {
    if (polygon_contains(p, x, y)) inside = !inside;
  }
  return inside;
}

Region2D Region2D::from_sketch(const Sketch& sketch, double tolerance) {
  Region2D r;
  for (const Face& face : sketch.faces) {
    FaceRegion fr;
    for (const Loop& loop : face.loops) {
      Polygon poly = loop_polygon(loop, tolerance);
      for (const Vec2& v : poly) {
        fr.lo = {std::min(fr.lo.x, v.x), std::min(fr.lo.y, v.y)};
        fr.hi = {std::max(fr.hi.x, v.x), std::max(fr.hi.y, v.y)};
      }
      fr.loops.push_back(std::move(poly));
    }
    // Even-odd area: loops nested at odd depth subtract.
    for (size_t i = 0; i < fr.loops.size(); ++i) {
      if (fr.loops[i].empty()) continue;
      int depth = 0;
      const Vec2 probe = fr.loops[i][0];
      for (size_t j = 0; j < fr.loops.size(); ++j) {
        if (j != i && polygon_contains(fr.loops[j], probe.x, probe.y)) ++depth;
      }
      const double a = std::abs(polygon_signed_area(fr.loops[i]));
      fr.area += depth % 2 == 0 ? a : -a;
    }
    fr.area = std::max(fr.area, 0.0);
    r.lo_ = {std::min(r.lo_.x, fr.lo.x), std::min(r.lo_.y, fr.lo.y)};
    r.hi_ = {std::max(r.hi_.x, fr.hi.x), std::max(r.hi_.y, fr.hi.y)};
    r.faces_.push_back(std::move(fr));
  }
  return r;
}

bool Region2D::contains(double x, double y) const {
  if (x < lo_.x || x > hi_.x || y < lo_.y || y > hi_.y) return false;
  for (const FaceRegion& f : faces_) {
    if (f.contains(x, y)) return true;
  }
  return false;
}

double Region2D::area() const {
  double a = 0.0;
  for (const FaceRegion& f : faces_) a += f.area;
  return a;
}

double Region2D::perimeter() const {
  double p = 0.0;
  for (const FaceRegion& f : faces_) {
    for (const Polygon& poly : f.loops) {
      for (size_t i = 0; i < poly.size(); ++i) p += dist(poly[i], poly[(i + 1) % poly.size()]);
    }
  }
  return p;
}

bool Primitive::contains(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d q = pose.to_plane(p);
  if (q.z() < z_lo || q.z() > z_hi) return false;
  return region.contains(q.x() / pose.sigma, q.y() / pose.sigma);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> Primitive::world_bbox() const {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
  for (int c = 0; c < 8; ++c) {
    const double x = (c & 1) ? region.hi().x : region.lo().x;
    const double y = (c & 2) ? region.hi().y : region.lo().y;
    const double z = (c & 4) ? z_hi : z_lo;
    const Eigen::Vector3d w = pose.to_world(x, y, z);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  return {lo, hi};
}

bool Solid::contains(const Eigen::Vector3d& p) const {
  bool inside = false;
  for (const Primitive& prim : primitives_) {
    switch (prim.op) {
      case BooleanOp::New:
      case BooleanOp::Join:
        if (!inside) inside = prim.contains(p);
        break;
      case BooleanOp::Cut:
        if (inside) inside = !prim.contains(p);
        break;
      case BooleanOp::Intersect:
        if (inside) inside = prim.contains(p);
        break;
    }
  }
  return inside;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> Solid::bbox() const {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
  for (const Primitive& p : primitives_) {
    if (p.op == BooleanOp::Cut) continue;
    const auto [a, b] = p.world_bbox();
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------

std::optional<std::string> validate_geometry(const CadProgram& prog) {
  if (prog.steps.empty()) return "empty program";
  for (size_t si = 0; si < prog.steps.size(); ++si) {
    const DesignStep& step = prog.steps[si];
    const ExtrusionOp& e = step.extrusion;
    const std::string at_step = " (step " + std::to_string(si + 1) + ")";
    if (!(e.sigma > 0)) return "non-positive sketch scale" + at_step;
    if (!(e.d_plus + e.d_minus > 0)) return "zero extrusion distance" + at_step;
    if (step.sketch.faces.empty()) return "empty sketch" + at_step;
    for (size_t fi = 0; fi < step.sketch.faces.size(); ++fi) {
      const Face& face = step.sketch.faces[fi];
      if (face.loops.empty()) return "empty face" + at_step;
      for (size_t li = 0; li < face.loops.size(); ++li) {
        const Loop& loop = face.loops[li];
        if (loop.curves.empty()) return "empty loop" + where(si, fi, li);
        for (const Curve& c : loop.curves) {
          if (auto problem = curve_problem(c)) return *problem + where(si, fi, li);
        }
        const size_t m = loop.curves.size();
        const bool has_circle = std::any_of(loop.curves.begin(), loop.curves.end(), [](const Curve& c) {
          return std::holds_alternative<Circle>(c);
        });
        if (has_circle) {
          if (m != 1) return "open loop: circle combined with other curves" + where(si, fi, li);
          continue;
        }
        if (m == 1) return "open loop" + where(si, fi, li);
        for (size_t i = 0; i < m; ++i) {
          if (dist(curve_end(loop.curves[i]), curve_start(loop.curves[(i + 1) % m])) >
              kQuantum * 1.01) {
            return "open loop" + where(si, fi, li);
          }
        }
        if (std::abs(loop_signed_area(loop)) < 1e-9) return "zero-area face" + where(si, fi, li);
      }
      Sketch single;
      single.faces.push_back(face);
      if (Region2D::from_sketch(single, kTessellationTolerance).area() < 1e-9) {
        return "zero-area face (step " + std::to_string(si + 1) + ", face " + std::to_string(fi) + ")";
      }
    }
  }
  return std::nullopt;
}

Solid build_solid(const CadProgram& prog) {
  std::vector<Primitive> prims;
  for (const DesignStep& step : prog.steps) {
    Primitive p;
    p.pose = Pose::from(step.extrusion);
    p.region = Region2D::from_sketch(step.sketch, kTessellationTolerance);
    p.z_lo = -step.extrusion.d_minus;
    p.z_hi = step.extrusion.d_plus;
    p.op = step.extrusion.op;
    prims.push_back(std::move(p));
  }
  return Solid(std::move(prims));
}

namespace {

struct WallEdge {
  Vec2 a, b;
};

struct SurfacePatch {
  int prim;
  Surface surface;
  std::vector<WallEdge> edges;      // walls only
  std::vector<double> edge_cdf;     // walls only
  std::vector<double> face_weight;  // caps only
};

bool sample_in_face(const Region2D::FaceRegion& f, std::mt19937_64& rng, Vec2& out) {
  std::uniform_real_distribution<double> ux(f.lo.x, f.hi.x);
  std::uniform_real_distribution<double> uy(f.lo.y, f.hi.y);
  for (int tries = 0; tries < 2000; ++tries) {
    const Vec2 v{ux(rng), uy(rng)};
    if (f.contains(v.x, v.y)) {
      out = v;
      return true;
    }
  }
  return false;
}

}  // namespace

SolidSample evaluate_program(const CadProgram& prog, int n_samples, std::uint64_t seed) {
  SolidSample s;
  s.points.resize(0, 3);
  s.normals.resize(0, 3);
  if (auto problem = validate_geometry(prog)) {
    s.diagnosis = *problem;
    return s;
  }
  s.solid = build_solid(prog);
  const auto [lo, hi] = s.solid.bbox();
  if (!(lo.array() <= hi.array()).all()) {
    s.diagnosis = "empty solid";
    return s;
  }
  s.epsilon = 1e-4 * (hi - lo).norm();

  std::vector<SurfacePatch> patches;
  std::vector<double> weights;
  const auto& prims = s.solid.primitives();
  for (int pi = 0; pi < static_cast<int>(prims.size()); ++pi) {
    const Primitive& p = prims[pi];
    const double sigma = p.pose.sigma;
    const double cap_area = sigma * sigma * p.region.area();
    for (Surface cap : {Surface::TopCap, Surface::BottomCap}) {
      SurfacePatch patch{pi, cap, {}, {}, {}};
      for (const auto& f : p.region.faces()) patch.face_weight.push_back(f.area);
      patches.push_back(std::move(patch));
      weights.push_back(cap_area);
    }
    SurfacePatch wall{pi, Surface::Wall, {}, {}, {}};
    double total = 0.0;
    for (const auto& f : p.region.faces()) {
      for (const auto& poly : f.loops) {
        for (size_t i = 0; i < poly.size(); ++i) {
          const WallEdge e{poly[i], poly[(i + 1) % poly.size()]};
          total += dist(e.a, e.b);
          wall.edges.push_back(e);
          wall.edge_cdf.push_back(total);
        }
      }
    }
    patches.push_back(std::move(wall));
    weights.push_back(total * sigma * (p.z_hi - p.z_lo));
  }

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::discrete_distribution<int> pick_patch(weights.begin(), weights.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Eigen::Vector3d> kept_points;
  std::vector<Eigen::Vector3d> kept_normals;
  std::vector<PointOrigin> kept_origins;
  const int batch = std::max(4 * n_samples, 2048);
  for (int round = 0; round < 16 && static_cast<int>(kept_points.size()) < n_samples; ++round) {
    for (int c = 0; c < batch; ++c) {
      const SurfacePatch& patch = patches[pick_patch(rng)];
      const Primitive& prim = prims[patch.prim];
      Eigen::Vector3d local_n;
      double x = 0, y = 0, z = 0;
      if (patch.surface == Surface::Wall) {
        const double r = unit(rng) * patch.edge_cdf.back();
        const size_t ei = std::min<size_t>(
            std::lower_bound(patch.edge_cdf.begin(), patch.edge_cdf.end(), r) - patch.edge_cdf.begin(),
            patch.edges.size() - 1);
        const WallEdge& e = patch.edges[ei];
        const double t = unit(rng);
        x = e.a.x + t * (e.b.x - e.a.x);
        y = e.a.y + t * (e.b.y - e.a.y);
        z = prim.z_lo + unit(rng) * (prim.z_hi - prim.z_lo);
        const double len = dist(e.a, e.b);
        if (len <= 0) continue;
        local_n = Eigen::Vector3d((e.b.y - e.a.y) / len, -(e.b.x - e.a.x) / len, 0.0);
      } else {
        std::discrete_distribution<int> pick_face(patch.face_weight.begin(), patch.face_weight.end());
        Vec2 v;
        if (!sample_in_face(prim.region.faces()[pick_face(rng)], rng, v)) continue;
        x = v.x;
        y = v.y;
        z = patch.surface == Surface::TopCap ? prim.z_hi : prim.z_lo;
        local_n = Eigen::Vector3d(0, 0, patch.surface == Surface::TopCap ? 1.0 : -1.0);
      }
      const Eigen::Vector3d p = prim.pose.to_world(x, y, z);
      const Eigen::Vector3d n = prim.pose.rotation * local_n;
      const bool behind = s.solid.contains(p - s.epsilon * n);
      const bool ahead = s.solid.contains(p + s.epsilon * n);
      if (behind == ahead) continue;
      kept_points.push_back(p);
      kept_normals.push_back(behind ? n : Eigen::Vector3d(-n));
      kept_origins.push_back({patch.prim, patch.surface});
    }
  }
  if (kept_points.empty()) {
    s.diagnosis = "empty solid";
    return s;
  }

  std::vector<int> chosen;
  const int kept = static_cast<int>(kept_points.size());
  if (kept >= n_samples) {
    std::vector<int> order(kept);
    for (int i = 0; i < kept; ++i) order[i] = i;
    for (int i = 0; i < n_samples; ++i) {
      std::uniform_int_distribution<int> pick(i, kept - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    chosen.assign(order.begin(), order.begin() + n_samples);
  } else {
    std::uniform_int_distribution<int> pick(0, kept - 1);
    for (int i = 0; i < n_samples; ++i) chosen.push_back(pick(rng));
  }
  s.points.resize(n_samples, 3);
  s.normals.resize(n_samples, 3);
  s.origins.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    s.points.row(i) = kept_points[chosen[i]].transpose();
    s.normals.row(i) = kept_normals[chosen[i]].transpose();
    s.origins[i] = kept_origins[chosen[i]];
  }
  s.valid = true;
  return s;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::Vector3d least_variance_direction(const Points& cloud, const std::vector<int>& idx) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int j : idx) mean += cloud.row(j).transpose();
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int j : idx) {
    const Eigen::Vector3d d = cloud.row(j).transpose() - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  return eig.eigenvectors().col(0).normalized();
}

}  // namespace

Points estimate_normals(const Points& cloud, int k) {
  const int n = static_cast<int>(cloud.rows());
  if (n < 4) throw DomainError("estimate_normals needs at least 4 points");
  const int neighbors = std::min(k, n - 1);
  KdTree tree(cloud);
  Points normals(n, 3);
  std::vector<int> idx, inliers, best;
  std::vector<double> d2;
  for (int i = 0; i < n; ++i) {
    tree.knn(cloud.row(i).transpose(), neighbors + 1, idx, d2);
    // Planes through the point and every neighbor pair; the one with the most
    // neighbors within tolerance keeps neighborhoods straddling an edge from
    // mixing two faces. PCA then runs over that plane's inliers.
    const Eigen::Vector3d p = cloud.row(i).transpose();
    const double tol = kNormalInlierFraction * std::sqrt(d2.back());
    best.clear();
    for (size_t a = 1; a < idx.size(); ++a) {
      const Eigen::Vector3d pa = cloud.row(idx[a]).transpose() - p;
      for (size_t b = a + 1; b < idx.size(); ++b) {
        Eigen::Vector3d cand = pa.cross(cloud.row(idx[b]).transpose() - p);
        const double len = cand.norm();
        if (!(len > 1e-12)) continue;
        cand /= len;
        inliers.clear();
        for (int j : idx) {
          if (std::abs(cand.dot(cloud.row(j).transpose() - p)) <= tol) inliers.push_back(j);
        }
        if (inliers.size() > best.size()) best.swap(inliers);
      }
    }
    Eigen::Vector3d nrm = least_variance_direction(cloud, best.size() >= 3 ? best : idx);
    for (int axis : {2, 0, 1}) {
      if (std::abs(nrm[axis]) > 1e-9) {
        if (nrm[axis] < 0) nrm = -nrm;
        break;
      }
    }
    normals.row(i) = nrm.transpose();
  }
  return normals;
}

Points normalize_to_unit_box(const Points& cloud) {
  if (cloud.rows() == 0) throw DomainError("normalize_to_unit_box: empty cloud");
  const Eigen::RowVector3d lo = cloud.colwise().minCoeff();
  const Eigen::RowVector3d hi = cloud.colwise().maxCoeff();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 1e-12)) throw DomainError("normalize_to_unit_box: zero-extent cloud");
  Points out = cloud.rowwise() - lo;
  out /= extent;
  return out;
}

// ---------------------------------------------------------------------------

Mesh mesh_solid(const Solid& solid, int resolution) {
  Mesh mesh;
  auto [lo, hi] = solid.bbox();
  if (!(lo.array() <= hi.array()).all()) return mesh;
  const double h = std::max((hi - lo).maxCoeff(), 1e-9) / resolution;
  const Eigen::Vector3d origin = lo - Eigen::Vector3d::Constant(h);
  const Eigen::Vector3i dims = (((hi - lo) / h).array().ceil().cast<int>() + 3).matrix();
  const long nx = dims.x(), ny = dims.y(), nz = dims.z();
  auto vid = [&](long i, long j, long k) { return i + nx * (j + ny * k); };
  auto pos = [&](long id) {
    const long i = id % nx;
    const long j = (id / nx) % ny;
    const long k = id / (nx * ny);
    return Eigen::Vector3d(origin + h * Eigen::Vector3d(double(i), double(j), double(k)));
  };
  std::vector<char> inside(static_cast<size_t>(nx * ny * nz));
  for (long id = 0; id < nx * ny * nz; ++id) inside[id] = solid.contains(pos(id)) ? 1 : 0;

  std::unordered_map<std::uint64_t, int> edge_vertex;
  const std::uint64_t total = static_cast<std::uint64_t>(nx * ny * nz);
  auto crossing = [&](long a, long b) {
    if (a > b) std::swap(a, b);
    const std::uint64_t key = static_cast<std::uint64_t>(a) * total + static_cast<std::uint64_t>(b);
    if (auto it = edge_vertex.find(key); it != edge_vertex.end()) return it->second;
    Eigen::Vector3d in = pos(a), out = pos(b);
    if (!inside[a]) std::swap(in, out);
    for (int it = 0; it < 8; ++it) {
      const Eigen::Vector3d m = 0.5 * (in + out);
      (solid.contains(m) ? in : out) = m;
    }
    const int v = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(0.5 * (in + out));
    edge_vertex.emplace(key, v);
    return v;
  };

  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kTets[6][4] = {{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6},
                                      {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}};
  auto emit = [&](int a, int b, int c, const Eigen::Vector3d& outward) {
    const Eigen::Vector3d n =
        (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
    if (n.dot(outward) < 0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };
  for (long k = 0; k + 1 < nz; ++k) {
    for (long j = 0; j + 1 < ny; ++j) {
      for (long i = 0; i + 1 < nx; ++i) {
        long corner[8];
        int count = 0;
        for (int c = 0; c < 8; ++c) {
          corner[c] = vid(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          count += inside[corner[c]];
        }
        if (count == 0 || count == 8) continue;
        for (const auto& tet : kTets) {
          std::vector<long> in, out;
          for (int t : tet) (inside[corner[t]] ? in : out).push_back(corner[t]);
          if (in.empty() || out.empty()) continue;
          Eigen::Vector3d cin = Eigen::Vector3d::Zero(), cout = Eigen::Vector3d::Zero();
          for (long v : in) cin += pos(v);
          for (long v : out) cout += pos(v);
          const Eigen::Vector3d outward = cout / double(out.size()) - cin / double(in.size());
          if (in.size() == 1 || out.size() == 1) {
            const std::vector<long>& lone = in.size() == 1 ? in : out;
            const std::vector<long>& rest = in.size() == 1 ? out : in;
            emit(crossing(lone[0], rest[0]), crossing(lone[0], rest[1]), crossing(lone[0], rest[2]),
                 outward);
          } else {
            const int q0 = crossing(in[0], out[0]);
            const int q1 = crossing(in[0], out[1]);
            const int q2 = crossing(in[1], out[1]);
            const int q3 = crossing(in[1], out[0]);
            emit(q0, q1, q2, outward);
            emit(q0, q2, q3, outward);
          }
        }
      }
    }
  }
  return mesh;
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ostringstream out;
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  write_file(path, out.str());
}

void write_ply(const std::filesystem::path& path, const Cloud& cloud) {
  if (cloud.cols() != 3 && cloud.cols() != 6) throw ShapeError("PLY cloud must have 3 or 6 columns");
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(cloud.rows()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.cols() == 6) out += "property float nx\nproperty float ny\nproperty float nz\n";
  out += "end_header\n";
  const size_t bytes = static_cast<size_t>(cloud.size()) * sizeof(float);
  const size_t header = out.size();
  out.resize(header + bytes);
  std::memcpy(out.data() + header, cloud.data(), bytes);
  write_file(path, out);
}

Cloud read_ply(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const size_t header_end = bytes.find("end_header");
  if (bytes.rfind("ply", 0) != 0 || header_end == std::string::npos) {
    throw IoError(path.string() + ": not a PLY file");
  }
  const size_t body = bytes.find('\n', header_end) + 1;
  std::istringstream header(bytes.substr(0, header_end));
  std::string line, format;
  long count = -1;
  struct Property {
    std::string type, name;
  };
  std::vector<Property> props;
  bool in_vertex = false;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      ls >> format;
    } else if (word == "element") {
      std::string name;
      long n = 0;
      ls >> name >> n;
      in_vertex = name == "vertex";
      if (in_vertex) count = n;
      else if (count < 0) throw IoError(path.string() + ": vertex element must come first");
    } else if (word == "property" && in_vertex) {
      Property p;
      ls >> p.type >> p.name;
      if (p.type == "list") throw IoError(path.string() + ": list properties on vertices unsupported");
      props.push_back(p);
    }
  }
  if (count < 0) throw IoError(path.string() + ": no vertex element");
  auto type_size = [&](const std::string& t) -> size_t {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    throw IoError(path.string() + ": unsupported property type " + t);
  };
  const std::array<std::string, 6> wanted = {"x", "y", "z", "nx", "ny", "nz"};
  std::array<int, 6> column{};
  column.fill(-1);
  for (size_t i = 0; i < props.size(); ++i) {
    for (int w = 0; w < 6; ++w) {
      if (props[i].name == wanted[w]) column[w] = static_cast<int>(i);
    }
  }
  if (column[0] < 0 || column[1] < 0 || column[2] < 0) throw IoError(path.string() + ": missing x/y/z");
  const bool normals = column[3] >= 0 && column[4] >= 0 && column[5] >= 0;
  Cloud cloud(count, normals ? 6 : 3);
  const int out_cols = normals ? 6 : 3;

  if (format == "ascii") {
    std::istringstream in(bytes.substr(body));
    std::vector<double> row(props.size());
    for (long r = 0; r < count; ++r) {
      for (auto& v : row) {
        if (!(in >> v)) throw IoError(path.string() + ": truncated ASCII vertex data");
      }
      for (int w = 0; w < out_cols; ++w) cloud(r, w) = static_cast<float>(row[column[w]]);
    }
    return cloud;
  }
  if (format != "binary_little_endian") throw IoError(path.string() + ": unsupported PLY format " + format);
  std::vector<size_t> offset(props.size());
  size_t stride = 0;
  for (size_t i = 0; i < props.size(); ++i) {
    offset[i] = stride;
    stride += type_size(props[i].type);
  }
  if (bytes.size() < body + stride * static_cast<size_t>(count)) {
    throw IoError(path.string() + ": truncated binary vertex data");
  }
  auto read_value = [&](const char* p, const std::string& t) -> double {
    if (t == "float" || t == "float32") {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    if (t == "double" || t == "float64") {
      double d;
      std::memcpy(&d, p, 8);
      return d;
    }
    if (t == "uchar" || t == "uint8") return static_cast<unsigned char>(*p);
    if (t == "char" || t == "int8") return static_cast<signed char>(*p);
    if (t == "short" || t == "int16") {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return v;
    }
    if (t == "ushort" || t == "uint16") {
      std::uint16_t v;
      std::memcpy(&v, p, 2);
      return v;
    }
    if (t == "int" || t == "int32") {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
  };
  for (long r = 0; r < count; ++r) {
    const char* base = bytes.data() + body + stride * static_cast<size_t>(r);
    for (int w = 0; w < out_cols; ++w) {
      const int c = column[w];
      cloud(r, w) = static_cast<float>(read_value(base + offset[c], props[c].type));
    }
  }
  return cloud;
}

Points cloud_xyz(const Cloud& cloud) {
  return cloud.leftCols(3).cast<double>();
}

Cloud make_cloud(const Points& xyz, const Points* normals) {
  Cloud c(xyz.rows(), normals ? 6 : 3);
  c.leftCols(3) = xyz.cast<float>();
  if (normals) c.rightCols(3) = normals->cast<float>();
  return c;
}

}  // namespace cadsig
