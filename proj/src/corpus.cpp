#include "cadsig/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cadsig/errors.hpp"
#include "cadsig/geom.hpp"
#include "cadsig/metrics.hpp"
#include "cadsig/program_io.hpp"

namespace cadsig {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> list_fixtures(const fs::path& root) {
  std::vector<std::string> out;
  if (!fs::is_directory(root)) throw IoError(root.string() + ": fixture directory not found");
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "expected.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::string token_diff(const std::vector<Token2D>& want, const std::vector<Token2D>& got) {
  const size_t n = std::min(want.size(), got.size());
  size_t i = 0;
  while (i < n && want[i] == got[i]) ++i;
  std::ostringstream os;
  os << "first difference at token " << i << ": expected ";
  if (i < want.size()) {
    os << "(" << want[i].a << "," << want[i].b << ")";
  } else {
    os << "end of stream";
  }
  os << ", got ";
  if (i < got.size()) {
    os << "(" << got[i].a << "," << got[i].b << ")";
  } else {
    os << "end of stream";
  }
  os << " (lengths " << want.size() << " vs " << got.size() << ")";
  return os.str();
}

Eigen::Vector3d vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

double box_surface_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  bool inside = true;
  for (int k = 0; k < 3; ++k) inside = inside && p[k] >= lo[k] && p[k] <= hi[k];
  if (inside) {
    double d = 1e300;
    for (int k = 0; k < 3; ++k) d = std::min({d, p[k] - lo[k], hi[k] - p[k]});
    return d;
  }
  Eigen::Vector3d q = p.cwiseMax(lo).cwiseMin(hi);
  return (p - q).norm();
}

// Deterministic grid over the six faces of a box.
Points box_surface_grid(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int per_side) {
  std::vector<Eigen::Vector3d> pts;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      for (int i = 0; i < per_side; ++i) {
        for (int j = 0; j < per_side; ++j) {
          Eigen::Vector3d p;
          p[axis] = side ? hi[axis] : lo[axis];
          p[u] = lo[u] + (hi[u] - lo[u]) * (i + 0.5) / per_side;
          p[v] = lo[v] + (hi[v] - lo[v]) * (j + 0.5) / per_side;
          pts.push_back(p);
        }
      }
    }
  }
  Points out(static_cast<long>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) out.row(static_cast<long>(i)) = pts[i].transpose();
  return out;
}

struct Context {
  fs::path dir;
  std::optional<std::vector<Token2D>> tokens;
  std::optional<CadProgram> program;
  std::string parse_error;
  std::optional<SolidSample> sample;

  const SolidSample& evaluated(int n, std::uint64_t seed) {
    if (!sample) {
      if (!program) {
        sample.emplace();
        sample->diagnosis = parse_error;
      } else {
        sample = evaluate_program(*program, n, seed);
      }
    }
    return *sample;
  }
};

void run_check(const json& c, Context& ctx, std::vector<std::string>& fail) {
  const std::string type = c.at("type").get<std::string>();
  auto need_program = [&]() -> const CadProgram& {
    if (!ctx.program) throw ValidationError("check '" + type + "' needs a parsable input: " + ctx.parse_error);
    return *ctx.program;
  };
  if (type == "stream") {
    const auto want = tokens_from_json(c.at("expected"));
    const auto got = program_to_stream(need_program()).unpadded();
    if (want != got) fail.push_back("stream: " + token_diff(want, got));
  } else if (type == "roundtrip") {
    if (!ctx.tokens) throw ValidationError("roundtrip needs a token input");
    const auto got = program_to_stream(need_program()).unpadded();
    if (got != *ctx.tokens) fail.push_back("roundtrip: " + token_diff(*ctx.tokens, got));
  } else if (type == "curve_count") {
    const int want = c.at("expected").get<int>();
    const int got = curve_count(need_program());
    if (want != got) fail.push_back("curve_count: expected " + std::to_string(want) + ", got " + std::to_string(got));
  } else if (type == "validity") {
    const SolidSample& s = ctx.evaluated(c.value("points", 2048), c.value("seed", 0));
    const bool want = c.at("valid").get<bool>();
    if (s.valid != want) {
      fail.push_back(std::string("validity: expected ") + (want ? "valid" : "invalid") + ", got " +
                     (s.valid ? "valid" : "invalid (" + s.diagnosis + ")"));
    }
    const std::string needle = c.value("diagnosis_contains", std::string());
    if (!needle.empty() && s.diagnosis.find(needle) == std::string::npos) {
      fail.push_back("validity: diagnosis '" + s.diagnosis + "' does not contain '" + needle + "'");
    }
  } else if (type == "membership") {
    const Solid solid = build_solid(need_program());
    for (const char* key : {"inside", "outside"}) {
      const bool want = std::string(key) == "inside";
      for (const json& p : c.value(key, json::array())) {
        if (solid.contains(vec3(p)) != want) fail.push_back(std::string("membership: ") + p.dump() + " not " + key);
      }
    }
  } else if (type == "surface_box") {
    const SolidSample& s = ctx.evaluated(c.value("points", 2048), c.value("seed", 0));
    if (!s.valid) {
      fail.push_back("surface_box: program invalid (" + s.diagnosis + ")");
      return;
    }
    const Eigen::Vector3d lo = vec3(c.at("lo")), hi = vec3(c.at("hi"));
    const double tol = c.value("tolerance", kGeometryTolerance);
    double worst = 0.0;
    for (long i = 0; i < s.points.rows(); ++i) {
      worst = std::max(worst, box_surface_distance(s.points.row(i).transpose(), lo, hi));
    }
    if (worst > tol) fail.push_back("surface_box: max distance " + std::to_string(worst) + " > " + std::to_string(tol));
  } else if (type == "chamfer_box") {
    const SolidSample& s = ctx.evaluated(c.value("points", 2048), c.value("seed", 0));
    if (!s.valid) {
      fail.push_back("chamfer_box: program invalid (" + s.diagnosis + ")");
      return;
    }
    const Points grid = box_surface_grid(vec3(c.at("lo")), vec3(c.at("hi")), c.value("grid", 24));
    const double cd = chamfer(s.points, grid);
    const double max = c.at("max").get<double>();
    if (!(cd <= max)) fail.push_back("chamfer_box: CD " + std::to_string(cd) + " > " + std::to_string(max));
  } else if (type == "assignment") {
    const json& m = c.at("cost");
    const int n = static_cast<int>(m.size());
    std::vector<double> cost;
    for (const json& row : m) {
      for (const json& v : row) cost.push_back(v.get<double>());
    }
    const auto got = hungarian(cost, n);
    const auto want = c.at("expected").get<std::vector<int>>();
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[static_cast<size_t>(i) * n + got[i]];
    if (got != want) fail.push_back("assignment: expected " + json(want).dump() + ", got " + json(got).dump());
    if (std::abs(total - c.at("total").get<double>()) > kCostTolerance) {
      fail.push_back("assignment: total " + std::to_string(total) + " != " + c.at("total").dump());
    }
  } else if (type == "extrusion_f1") {
    const Prf p = extrusion_f1(c.at("gt").get<int>(), c.at("pred").get<int>());
    for (const auto& [key, got] : {std::pair<const char*, double>{"precision", p.precision()},
                                   {"recall", p.recall()},
                                   {"f1", p.f1()}}) {
      if (c.contains(key) && std::abs(got - c.at(key).get<double>()) > kCostTolerance) {
        fail.push_back(std::string("extrusion_f1: ") + key + " " + std::to_string(got) + " != " + c.at(key).dump());
      }
    }
  } else {
    throw ValidationError("unknown check type '" + type + "'");
  }
}

}  // namespace

FixtureResult run_fixture(const fs::path& root, const std::string& name) {
  const fs::path dir = root / name;
  const fs::path file = dir / "expected.json";
  if (!fs::exists(file)) throw IoError("unknown fixture '" + name + "' (no " + file.string() + ")");
  json spec;
  try {
    spec = json::parse(read_file(file));
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
  FixtureResult r;
  r.name = name;
  Context ctx;
  ctx.dir = dir;
  try {
    r.provenance = spec.at("provenance").at("kind").get<std::string>();
    if (r.provenance != "trivial" && r.provenance != "derived" && r.provenance != "published") {
      throw ValidationError("provenance kind must be trivial, derived or published");
    }
    if (r.provenance == "derived" && spec.at("provenance").value("oracle", std::string()).empty()) {
      throw ValidationError("derived fixtures must name their oracle");
    }
    const json& in = spec.value("input", json::object());
    if (in.contains("tokens")) {
      ctx.tokens = tokens_from_json(in.at("tokens"));
      try {
        ctx.program = tokens_to_program(*ctx.tokens);
      } catch (const SyntaxError& e) {
        ctx.parse_error = e.what();
      }
    } else if (in.contains("program")) {
      ctx.program = load_program(dir / in.at("program").get<std::string>());
    }
    for (const json& c : spec.at("checks")) run_check(c, ctx, r.failures);
  } catch (const json::exception& e) {
    throw ValidationError(file.string() + ": malformed fixture: " + e.what());
  }
  r.passed = r.failures.empty();
  return r;
}

}  // namespace cadsig
