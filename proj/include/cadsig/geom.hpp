#pragma once

// Geometric evaluation of CAD programs: sketch-plane poses, sketch-instance
// extraction, extruded-solid membership with sequential booleans, boundary
// point sampling, normal estimation and point-cloud / mesh file formats.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadsig/cad_lang.hpp"
#include "cadsig/spatial.hpp"

namespace cadsig {

using Cloud = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// R = Rz(gamma) * Ry(phi) * Rx(theta).
Eigen::Matrix3d euler_to_rotation(double theta, double phi, double gamma);

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d tau = Eigen::Vector3d::Zero();
  double sigma = 1.0;

  static Pose from(const ExtrusionOp& e);
  /// World point -> sketch-plane frame (unscaled, z along the plane normal).
  Eigen::Vector3d to_plane(const Eigen::Vector3d& p) const { return rotation.transpose() * (p - tau); }
  /// Normalized sketch coordinates at plane height z -> world point.
  Eigen::Vector3d to_world(double x, double y, double z) const {
    return rotation * Eigen::Vector3d(sigma * x, sigma * y, z) + tau;
  }
};

/// Columns are the projected corners of the unit sketch box: origin, +y, +x.
Eigen::Matrix3d project_unit_bbox(const ExtrusionOp& e);

/// Points of a cloud inside the sketch box of an extrusion, enlarged along the
/// plane normal by 0.1 * max(d+, d-).
struct SketchInstance {
  std::vector<int> indices;
  Eigen::Matrix3d corners;
  double margin = 0.0;
  int count() const { return static_cast<int>(indices.size()); }
};

bool in_sketch_box(const Eigen::Vector3d& p, const Pose& pose, double margin);
SketchInstance extract_sketch_instance(const Points& cloud, const ExtrusionOp& e);
SketchInstance extract_sketch_instance(const Points& cloud, const ExtrusionOp& e, double margin);
inline double instance_margin(const ExtrusionOp& e) { return 0.1 * std::max(e.d_plus, e.d_minus); }

/// Planar region made of faces; each face is an even-odd set of closed polygons.
class Region2D {
 public:
  using Polygon = std::vector<Vec2>;
  struct FaceRegion {
    std::vector<Polygon> loops;
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    double area = 0.0;
    bool contains(double x, double y) const;
  };

  static Region2D from_sketch(const Sketch& sketch, double tolerance);
  bool contains(double x, double y) const;
  double area() const;
  double perimeter() const;
  const std::vector<FaceRegion>& faces() const { return faces_; }
  Vec2 lo() const { return lo_; }
  Vec2 hi() const { return hi_; }

 private:
  std::vector<FaceRegion> faces_;
  Vec2 lo_{1e300, 1e300}, hi_{-1e300, -1e300};
};

/// One extruded sketch: region x [-d-, d+] in the sketch-plane frame.
struct Primitive {
  Pose pose;
  Region2D region;
  double z_lo = 0.0;
  double z_hi = 0.0;
  BooleanOp op = BooleanOp::New;
  bool contains(const Eigen::Vector3d& p) const;
  std::pair<Eigen::Vector3d, Eigen::Vector3d> world_bbox() const;
};

/// Sequential CSG of primitives: New/Join -> union, Cut -> difference,
/// Intersect -> intersection with the running solid.
class Solid {
 public:
  Solid() = default;
  explicit Solid(std::vector<Primitive> primitives) : primitives_(std::move(primitives)) {}
  bool contains(const Eigen::Vector3d& p) const;
  const std::vector<Primitive>& primitives() const { return primitives_; }
  /// Union of primitive boxes (an over-approximation of the solid's box).
  std::pair<Eigen::Vector3d, Eigen::Vector3d> bbox() const;

 private:
  std::vector<Primitive> primitives_;
};

enum class Surface { TopCap, BottomCap, Wall };

struct PointOrigin {
  int step = 0;  // 0-based primitive index
  Surface surface = Surface::Wall;
};

struct SolidSample {
  Solid solid;
  Points points;   // n x 3 boundary points
  Points normals;  // n x 3 outward unit normals
  std::vector<PointOrigin> origins;
  bool valid = false;
  std::string diagnosis;
  double epsilon = 0.0;  // two-sided boundary test offset
  bool inside(const Eigen::Vector3d& p) const { return solid.contains(p); }
};

/// Chordal tolerance for arcs and circles in normalized sketch units.
inline constexpr double kTessellationTolerance = 1.0 / 512.0;

/// Structural geometry problems (degenerate curve, open loop, zero-area face,
/// zero extrusion); nullopt when the program is well formed.
std::optional<std::string> validate_geometry(const CadProgram& prog);

Solid build_solid(const CadProgram& prog);

/// Evaluates a program and samples exactly n_samples boundary points. Never
/// throws on bad geometry; reports valid=false with a diagnosis instead.
SolidSample evaluate_program(const CadProgram& prog, int n_samples, std::uint64_t seed = 0);

/// Plane-consensus tolerance for normal estimation, relative to the distance of
/// the farthest of the k neighbors.
inline constexpr double kNormalInlierFraction = 0.02;

/// Unit normals from PCA over the 16 nearest neighbors, restricted to the
/// neighbors on the best-supported plane through the point; sign fixed toward
/// +z (then +x, then +y).
Points estimate_normals(const Points& cloud, int k = 16);

/// Translates the min corner to the origin and scales the largest extent to 1.
Points normalize_to_unit_box(const Points& cloud);

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> triangles;
};

/// Triangulated boundary of a solid by marching tetrahedra over its membership
/// function; `resolution` cells along the longest side.
Mesh mesh_solid(const Solid& solid, int resolution = 48);
void write_obj(const Mesh& mesh, const std::filesystem::path& path);

/// Binary little-endian float PLY with x,y,z and optional nx,ny,nz.
void write_ply(const std::filesystem::path& path, const Cloud& cloud);
/// Reads binary little-endian or ASCII PLY; returns n x 3 or n x 6.
Cloud read_ply(const std::filesystem::path& path);

Points cloud_xyz(const Cloud& cloud);
Cloud make_cloud(const Points& xyz, const Points* normals);

}  // namespace cadsig
