#include "cadsig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <thread>

#include "cadsig/program_io.hpp"

namespace cadsig {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMargin = 1.0 / 255.0;  // model box is [kMargin, 1 - kMargin]^3
constexpr int kAttempts = 100;
constexpr double kMinStepShare = 0.01;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  int weighted(const std::vector<double>& w) {
    return std::discrete_distribution<int>(w.begin(), w.end())(gen_);
  }
  std::uint64_t bits() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

Loop rectangle(double x0, double y0, double x1, double y1) {
  const Vec2 a{x0, y0}, b{x1, y0}, c{x1, y1}, d{x0, y1};
  return Loop{{Line{a, b}, Line{b, c}, Line{c, d}, Line{d, a}}};
}

Loop polygon(const std::vector<Vec2>& v) {
  Loop loop;
  for (size_t i = 0; i < v.size(); ++i) loop.curves.push_back(Line{v[i], v[(i + 1) % v.size()]});
  return loop;
}

Loop regular_polygon(Vec2 c, double r, int n, double phase) {
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * kPi * i / n;
    v.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return polygon(v);
}

Loop circle(Vec2 c, double r) { return Loop{{Circle{c, {c.x, c.y + r}}}}; }

/// Stadium inside [x0,x1]x[y0,y1], rounded along the longer side.
Loop slot(double x0, double y0, double x1, double y1) {
  const double w = x1 - x0, h = y1 - y0;
  if (w >= h) {
    const double r = h / 2;
    const Vec2 p0{x0 + r, y0}, p1{x1 - r, y0}, p2{x1 - r, y1}, p3{x0 + r, y1};
    return Loop{{Line{p0, p1}, Arc{p1, {x1, y0 + r}, p2}, Line{p2, p3}, Arc{p3, {x0, y0 + r}, p0}}};
  }
  const double r = w / 2;
  const Vec2 p0{x1, y0 + r}, p1{x1, y1 - r}, p2{x0, y1 - r}, p3{x0, y0 + r};
  return Loop{{Line{p0, p1}, Arc{p1, {x0 + r, y1}, p2}, Line{p2, p3}, Arc{p3, {x0 + r, y0}, p0}}};
}

/// One outer loop filling roughly [x0,x1]x[y0,y1], plus an optional hole.
Face make_face(Rng& rng, const GeneratorConfig& cfg, double x0, double y0, double x1, double y1) {
  const double w = x1 - x0, h = y1 - y0;
  const Vec2 c{(x0 + x1) / 2, (y0 + y1) / 2};
  const double rin = std::min(w, h) / 2;
  Face face;
  Loop outer;
  bool round_outer = false;
  switch (rng.weighted(cfg.shape_weights)) {
    case 0:
      outer = rectangle(x0, y0, x1, y1);
      break;
    case 1: {
      const double a = rng.uniform(0.15, 1.4);
      const double hw = rin * rng.uniform(0.6, 1.0), hh = rin * rng.uniform(0.3, 0.7);
      std::vector<Vec2> v;
      for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) {
        const double px = sx * hw, py = sy * hh;
        v.push_back({c.x + px * std::cos(a) - py * std::sin(a), c.y + px * std::sin(a) + py * std::cos(a)});
      }
      outer = polygon(v);
      break;
    }
    case 2:
      outer = regular_polygon(c, rin, rng.integer(3, 8), rng.uniform(0.0, kPi));
      round_outer = true;
      break;
    case 3:
      outer = circle(c, rin);
      round_outer = true;
      break;
    default:
      if (std::abs(w - h) < 0.2 * std::max(w, h)) {
        outer = w >= h ? slot(x0, c.y - h / 4, x1, c.y + h / 4) : slot(c.x - w / 4, y0, c.x + w / 4, y1);
      } else {
        outer = slot(x0, y0, x1, y1);
      }
      break;
  }
  face.loops.push_back(std::move(outer));
  if (rng.chance(cfg.hole_probability)) {
    // Holes stay well inside the inscribed circle of the outer shape.
    const double r = rin * rng.uniform(0.2, 0.35) * (round_outer ? 0.9 : 1.0);
    if (rng.chance(0.6)) {
      face.loops.push_back(circle(c, r));
    } else {
      face.loops.push_back(rectangle(c.x - r, c.y - r, c.x + r, c.y + r));
    }
  }
  return face;
}

double snap(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

/// Scales the sketch so its largest extent is 1 with the min corner at the
/// origin, then snaps every point to the quantization grid.
Sketch normalize_sketch(const Sketch& s) {
  Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
  for (const Face& f : s.faces) {
    const auto [a, b] = face_bbox(f);
    lo = {std::min(lo.x, a.x), std::min(lo.y, a.y)};
    hi = {std::max(hi.x, b.x), std::max(hi.y, b.y)};
  }
  const double ext = std::max(hi.x - lo.x, hi.y - lo.y);
  auto map = [&](const Vec2& v) { return Vec2{snap((v.x - lo.x) / ext), snap((v.y - lo.y) / ext)}; };
  Sketch out = s;
  for (Face& f : out.faces) {
    for (Loop& l : f.loops) {
      for (Curve& c : l.curves) {
        std::visit(
            [&](auto& cv) {
              using C = std::decay_t<decltype(cv)>;
              if constexpr (std::is_same_v<C, Line>) {
                cv = Line{map(cv.start), map(cv.end)};
              } else if constexpr (std::is_same_v<C, Arc>) {
                cv = Arc{map(cv.start), map(cv.mid), map(cv.end)};
              } else {
                cv = Circle{map(cv.center), map(cv.top)};
              }
            },
            c);
      }
    }
  }
  return out;
}

Sketch make_sketch(Rng& rng, const GeneratorConfig& cfg) {
  Sketch s;
  const double w = rng.uniform(0.35, 1.0), h = rng.uniform(0.35, 1.0);
  if (cfg.max_faces >= 2 && rng.chance(0.2)) {
    const double split = w * rng.uniform(0.35, 0.55);
    const double gap = w * 0.12;
    s.faces.push_back(make_face(rng, cfg, 0, 0, split, h));
    s.faces.push_back(make_face(rng, cfg, split + gap, 0, w + gap, h * rng.uniform(0.5, 1.0)));
  } else {
    s.faces.push_back(make_face(rng, cfg, 0, 0, w, h));
  }
  return reorder_and_orient(normalize_sketch(s));
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> local_box_extent(const Sketch& sketch, const ExtrusionOp& e) {
  Vec2 hi{0, 0};
  for (const Face& f : sketch.faces) {
    const auto b = face_bbox(f).second;
    hi = {std::max(hi.x, b.x), std::max(hi.y, b.y)};
  }
  const Pose pose = Pose::from(e);
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300), up = Eigen::Vector3d::Constant(-1e300);
  for (int c = 0; c < 8; ++c) {
    const Eigen::Vector3d w =
        pose.to_world((c & 1) ? hi.x : 0.0, (c & 2) ? hi.y : 0.0, (c & 4) ? e.d_plus : -e.d_minus);
    lo = lo.cwiseMin(w);
    up = up.cwiseMax(w);
  }
  return {lo, up};
}

std::optional<CadProgram> attempt(const GeneratorConfig& cfg, Rng& rng) {
  static const double kAngles[4] = {-kPi, -kPi / 2, 0.0, kPi / 2};
  CadProgram prog;
  const int n_steps = rng.integer(cfg.min_steps, cfg.max_steps);
  Eigen::Vector3d solid_lo, solid_hi;
  for (int si = 0; si < n_steps; ++si) {
    DesignStep step;
    step.sketch = make_sketch(rng, cfg);
    ExtrusionOp& e = step.extrusion;
    e.op = si == 0 ? BooleanOp::New : static_cast<BooleanOp>(rng.weighted(cfg.boolean_weights));
    for (double& a : e.euler) a = kAngles[rng.integer(0, 3)];
    const bool secondary = si > 0 && e.op != BooleanOp::New;
    e.sigma = rng.uniform(cfg.min_scale, secondary ? 0.6 * cfg.max_scale : cfg.max_scale);
    e.d_plus = rng.uniform(cfg.min_distance, cfg.max_distance);
    e.d_minus = rng.chance(0.25) ? rng.uniform(cfg.min_distance, cfg.max_distance) / 2 : 0.0;
    if (e.op == BooleanOp::Cut && rng.chance(0.5)) {
      std::swap(e.d_plus, e.d_minus);
      if (e.d_plus == 0.0) e.d_plus = cfg.min_distance;
    }
    if (e.op == BooleanOp::Intersect) {
      e.sigma = rng.uniform(0.5, 1.0);
      e.d_plus = rng.uniform(0.4, 1.0);
    }
    e.tau = {0, 0, 0};
    const auto [lo0, hi0] = local_box_extent(step.sketch, e);
    const Eigen::Vector3d ext = hi0 - lo0;
    Eigen::Vector3d region_lo = Eigen::Vector3d::Constant(kMargin);
    Eigen::Vector3d region_hi = Eigen::Vector3d::Constant(1.0 - kMargin);
    if (secondary) {
      region_lo = solid_lo;
      region_hi = solid_hi;
    }
    Eigen::Vector3d box_lo;
    for (int k = 0; k < 3; ++k) {
      const double room = region_hi[k] - region_lo[k] - ext[k];
      if (secondary && room < 0) {
        // Larger than the running solid along this axis: straddle it.
        box_lo[k] = region_lo[k] + room * rng.uniform(0.0, 1.0);
      } else {
        if (room < 0) return std::nullopt;
        box_lo[k] = region_lo[k] + room * rng.uniform(0.0, 1.0);
      }
      box_lo[k] = std::clamp(box_lo[k], kMargin, 1.0 - kMargin - ext[k]);
      if (ext[k] > 1.0 - 2 * kMargin) return std::nullopt;
    }
    const Eigen::Vector3d tau = box_lo - lo0;
    e.tau = {tau.x(), tau.y(), tau.z()};
    const Eigen::Vector3d lo = box_lo, hi = box_lo + ext;
    if (si == 0 || e.op == BooleanOp::New || e.op == BooleanOp::Join) {
      solid_lo = si == 0 ? lo : solid_lo.cwiseMin(lo);
      solid_hi = si == 0 ? hi : solid_hi.cwiseMax(hi);
    } else if (e.op == BooleanOp::Intersect) {
      solid_lo = solid_lo.cwiseMax(lo);
      solid_hi = solid_hi.cwiseMin(hi);
      if (!(solid_lo.array() < solid_hi.array()).all()) return std::nullopt;
    }
    prog.steps.push_back(std::move(step));
  }

  // Fit the evaluated model into [kMargin, 1 - kMargin]^3.
  const SolidSample probe = evaluate_program(prog, 2048, rng.bits());
  if (!probe.valid) return std::nullopt;
  const Eigen::RowVector3d lo = probe.points.colwise().minCoeff();
  const Eigen::RowVector3d hi = probe.points.colwise().maxCoeff();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 1e-6)) return std::nullopt;
  const double s = (1.0 - 2 * kMargin) / extent;
  for (DesignStep& step : prog.steps) {
    ExtrusionOp& e = step.extrusion;
    for (int k = 0; k < 3; ++k) e.tau[k] = kMargin + s * (e.tau[k] - lo[k]);
    e.sigma *= s;
    e.d_plus *= s;
    e.d_minus *= s;
  }
  try {
    return quantized(prog);
  } catch (const DomainError&) {
    return std::nullopt;  // a parameter left the quantizable range
  }
}

bool acceptable(const CadProgram& prog, const SolidSample& sample) {
  if (!sample.valid) return false;
  if ((sample.points.array() < -1e-6).any() || (sample.points.array() > 1.0 + 1e-6).any()) return false;
  std::vector<int> per_step(prog.steps.size(), 0);
  for (const PointOrigin& o : sample.origins) ++per_step[o.step];
  for (int c : per_step) {
    if (c < kMinStepShare * static_cast<double>(sample.points.rows())) return false;
  }
  return true;
}

}  // namespace

json GeneratorConfig::to_json() const {
  return {{"seed", seed},
          {"min_steps", min_steps},
          {"max_steps", max_steps},
          {"n_points", n_points},
          {"max_faces", max_faces},
          {"hole_probability", hole_probability},
          {"shape_weights", shape_weights},
          {"boolean_weights", boolean_weights},
          {"min_scale", min_scale},
          {"max_scale", max_scale},
          {"min_distance", min_distance},
          {"max_distance", max_distance},
          {"n_train", n_train},
          {"n_val", n_val},
          {"n_test", n_test}};
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  GeneratorConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.min_steps = j.value("min_steps", c.min_steps);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.n_points = j.value("n_points", c.n_points);
    c.max_faces = j.value("max_faces", c.max_faces);
    c.hole_probability = j.value("hole_probability", c.hole_probability);
    c.shape_weights = j.value("shape_weights", c.shape_weights);
    c.boolean_weights = j.value("boolean_weights", c.boolean_weights);
    c.min_scale = j.value("min_scale", c.min_scale);
    c.max_scale = j.value("max_scale", c.max_scale);
    c.min_distance = j.value("min_distance", c.min_distance);
    c.max_distance = j.value("max_distance", c.max_distance);
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.n_test = j.value("n_test", c.n_test);
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed generator config: ") + ex.what());
  }
  c.validate();
  return c;
}

void GeneratorConfig::validate() const {
  if (min_steps < 1 || max_steps < min_steps || max_steps > vocab::kMaxSteps) {
    throw ValidationError("generator steps must satisfy 1 <= min_steps <= max_steps <= 10");
  }
  if (n_points < 16) throw ValidationError("n_points must be at least 16");
  if (max_faces < 1) throw ValidationError("max_faces must be at least 1");
  if (shape_weights.size() != 5 || boolean_weights.size() != 4) {
    throw ValidationError("shape_weights needs 5 entries and boolean_weights 4");
  }
  if (!(min_scale > 0 && max_scale >= min_scale && max_scale < 1)) {
    throw ValidationError("scale range must satisfy 0 < min <= max < 1");
  }
  if (!(min_distance > 0 && max_distance >= min_distance && max_distance < 1)) {
    throw ValidationError("distance range must satisfy 0 < min <= max < 1");
  }
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ValidationError("split sizes must be >= 0");
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string GeneratorConfig::hash() const { return fnv1a_hex(to_json().dump()); }

namespace {

std::pair<CadProgram, SolidSample> generate_checked(const GeneratorConfig& cfg, int index) {
  for (int a = 0; a < kAttempts; ++a) {
    Rng rng(splitmix(splitmix(cfg.seed) ^ splitmix(static_cast<std::uint64_t>(index) * 1000 + a)));
    std::optional<CadProgram> prog;
    try {
      prog = attempt(cfg, rng);
    } catch (const ValidationError&) {
      continue;  // a snapped loop collapsed
    }
    if (!prog) continue;
    try {
      program_to_stream(*prog);
    } catch (const CapacityError&) {
      continue;
    }
    SolidSample sample = evaluate_program(*prog, cfg.n_points, rng.bits());
    if (acceptable(*prog, sample)) return {std::move(*prog), std::move(sample)};
  }
  throw GenerationError("sample " + std::to_string(index) + ": no valid program after " +
                        std::to_string(kAttempts) + " attempts");
}

}  // namespace

CadProgram generate_program(const GeneratorConfig& cfg, int index) {
  return generate_checked(cfg, index).first;
}

DatasetSample generate_sample(const GeneratorConfig& cfg, int index) {
  DatasetSample s;
  auto [prog, solid] = generate_checked(cfg, index);
  s.program = std::move(prog);
  const Points normals = estimate_normals(solid.points);
  s.cloud = make_cloud(solid.points, &normals);
  char id[16];
  std::snprintf(id, sizeof id, "s%06d", index);
  s.id = id;
  s.curve_count = curve_count(s.program);
  s.split = index < cfg.n_train ? "train" : index < cfg.n_train + cfg.n_val ? "val" : "test";
  return s;
}

std::vector<DatasetSample> generate_dataset(const GeneratorConfig& cfg, int threads) {
  cfg.validate();
  const int total = cfg.n_train + cfg.n_val + cfg.n_test;
  std::vector<DatasetSample> out(total);
  threads = std::max(1, std::min(threads, total));
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < total; i += threads) out[i] = generate_sample(cfg, i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<int> curriculum_order(const std::vector<int>& curve_counts) {
  std::vector<int> order(curve_counts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return curve_counts[a] < curve_counts[b]; });
  return order;
}

std::vector<int> curriculum_order(const std::vector<DatasetSample>& samples) {
  std::vector<int> counts;
  for (const auto& s : samples) counts.push_back(s.curve_count);
  return curriculum_order(counts);
}

std::vector<const DatasetSample*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetSample*> out;
  for (const auto& s : samples) {
    if (s.split == name) out.push_back(&s);
  }
  return out;
}

void write_dataset(const std::vector<DatasetSample>& samples, const GeneratorConfig& cfg,
                   const std::filesystem::path& dir) {
  json entries = json::array();
  json counts = {{"train", 0}, {"val", 0}, {"test", 0}};
  for (const auto& s : samples) {
    save_program(s.program, dir / "programs" / (s.id + ".json"));
    write_ply(dir / "clouds" / (s.id + ".ply"), s.cloud);
    entries.push_back(
        {{"id", s.id}, {"split", s.split}, {"curve_count", s.curve_count}, {"n_points", s.cloud.rows()}});
    counts[s.split] = counts.value(s.split, 0) + 1;
  }
  const json manifest = {{"version", "v1"},
                         {"config", cfg.to_json()},
                         {"config_hash", cfg.hash()},
                         {"counts", counts},
                         {"samples", entries}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& ex) {
    throw IoError("cannot parse " + manifest_path.string() + ": " + ex.what());
  }
  const std::string version = m.value("version", std::string("?"));
  if (version != "v1") {
    throw IoError(manifest_path.string() + ": unsupported dataset manifest version '" + version + "'");
  }
  Dataset ds;
  try {
    ds.config = GeneratorConfig::from_json(m.at("config"));
    ds.config_hash = m.at("config_hash").get<std::string>();
    if (ds.config_hash != ds.config.hash()) {
      throw IoError(manifest_path.string() + ": config hash does not match its config");
    }
    for (const json& e : m.at("samples")) {
      DatasetSample s;
      s.id = e.at("id").get<std::string>();
      s.split = e.at("split").get<std::string>();
      s.curve_count = e.at("curve_count").get<int>();
      const auto prog_path = dir / "programs" / (s.id + ".json");
      try {
        s.program = load_program(prog_path);
      } catch (const ValidationError& ex) {
        throw IoError(prog_path.string() + ": " + ex.what());
      }
      s.cloud = read_ply(dir / "clouds" / (s.id + ".ply"));
      if (s.cloud.rows() != e.at("n_points").get<long>()) {
        throw IoError((dir / "clouds" / (s.id + ".ply")).string() + ": point count differs from manifest");
      }
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& ex) {
    throw IoError(manifest_path.string() + ": malformed manifest: " + ex.what());
  }
  return ds;
}

}  // namespace cadsig
