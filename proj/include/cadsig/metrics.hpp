#pragma once

// Evaluation suite: squared Chamfer distance, Hungarian matching of loops and
// curves by bounding box, per-type curve F1, extrusion F1, invalidity ratio and
// quartiles.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/cad_lang.hpp"
#include "cadsig/spatial.hpp"

namespace cadsig {

/// (1/n) sum_x min_y |x-y|^2 + (1/m) sum_y min_x |y-x|^2. Throws DomainError on an empty cloud.
double chamfer(const Points& x, const Points& y);

/// Optimal assignment for a square cost matrix (row-major, n x n). Returns the
/// column assigned to every row.
std::vector<int> hungarian(const std::vector<double>& cost, int n);

using Box2 = std::pair<Vec2, Vec2>;

struct Matching {
  std::vector<std::pair<int, int>> pairs;  // (gt index or -1, pred index or -1)
  double cost = 0.0;                       // sum over pairs with both sides present
};

/// Cost of a pair: |bl_g - bl_p| + |tr_g - tr_p|. Both lists are padded with None
/// to equal length; None pairs cost the same large constant, so they never bias
/// the assignment of real entities.
double box_cost(const Box2& a, const Box2& b);
Matching match_entity_list(const std::vector<Box2>& gt, const std::vector<Box2>& pred);

struct Prf {
  long tp = 0, fp = 0, fn = 0;
  double precision() const;
  double recall() const;
  double f1() const;
  Prf& operator+=(const Prf& o);
  nlohmann::json to_json() const;
};

/// Per-type counts indexed by CurveType (line, arc, circle).
using CurveCounts = std::array<Prf, 3>;

/// Step-aligned sketch lists (nullopt = missing or unparsable sketch). Loops are
/// matched per sketch pair, curves within matched loops; unmatched entities count
/// as misses for their own type.
CurveCounts curve_f1(const std::vector<std::optional<Sketch>>& gt, const std::vector<std::optional<Sketch>>& pred);

/// TP = min, FP = max(0, pred - gt), FN = max(0, gt - pred).
Prf extrusion_f1(int gt_count, int pred_count);

/// 100 * invalid / total. Throws DomainError when empty.
double invalidity_ratio(const std::vector<bool>& valid);

struct Quartiles {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0;
};
/// Linear interpolation between order statistics at (n-1)p. Throws DomainError when empty.
double quantile(std::vector<double> values, double p);
Quartiles quartiles(const std::vector<double>& values);

/// One evaluated prediction.
struct EvalRecord {
  std::string id;
  bool valid = false;
  double cd = 0.0;  // squared Chamfer, only meaningful when valid
  CurveCounts curves;
  Prf extrusions;
  std::optional<double> cd_ratio;
};

struct EvalReport {
  int samples = 0;
  double mean_cd = 0.0;    // x 1e3, valid samples only; infinity when none are valid
  double median_cd = 0.0;  // x 1e3
  double ir_percent = 0.0;
  CurveCounts curves;
  Prf extrusions;
  std::optional<Quartiles> cd_ratio;
  nlohmann::json to_json() const;
};

EvalReport aggregate(const std::vector<EvalRecord>& records);

/// Compares a predicted token sequence with a ground-truth program: validity,
/// CD over `eval_points` samples of each reconstruction normalized to the unit
/// box, curve and extrusion counts.
EvalRecord evaluate_prediction(const std::string& id, const CadProgram& gt, const std::vector<Token2D>& pred,
                               int eval_points = 8192, std::uint64_t seed = 0);

}  // namespace cadsig
