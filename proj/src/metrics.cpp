#include "cadsig/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cadsig/errors.hpp"
#include "cadsig/geom.hpp"

namespace cadsig {

using nlohmann::json;

namespace {

double directed(const Points& from, const KdTree& to) {
  double sum = 0.0;
  for (long i = 0; i < from.rows(); ++i) {
    double d2 = 0.0;
    to.nearest(from.row(i).transpose(), &d2);
    sum += d2;
  }
  return sum / static_cast<double>(from.rows());
}

constexpr double kNoneCost = 1e6;

double json_number(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); }

}  // namespace

double chamfer(const Points& x, const Points& y) {
  if (x.rows() == 0 || y.rows() == 0) throw DomainError("chamfer: empty point cloud");
  const KdTree tx(x), ty(y);
  // Each direction is a separate sum so that chamfer(x, y) == chamfer(y, x) bit for bit.
  const double a = directed(x, ty);
  const double b = directed(y, tx);
  return std::min(a, b) + std::max(a, b);
}

std::vector<int> hungarian(const std::vector<double>& cost, int n) {
  if (static_cast<long>(cost.size()) != static_cast<long>(n) * n) {
    throw ShapeError("hungarian: cost has " + std::to_string(cost.size()) + " entries, expected " +
                     std::to_string(n) + "x" + std::to_string(n));
  }
  // Shortest augmenting paths with row/column potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) assign[p[j] - 1] = j - 1;
  }
  return assign;
}

double box_cost(const Box2& a, const Box2& b) {
  return std::hypot(a.first.x - b.first.x, a.first.y - b.first.y) +
         std::hypot(a.second.x - b.second.x, a.second.y - b.second.y);
}

Matching match_entity_list(const std::vector<Box2>& gt, const std::vector<Box2>& pred) {
  const int ng = static_cast<int>(gt.size());
  const int np = static_cast<int>(pred.size());
  const int n = std::max(ng, np);
  Matching m;
  if (n == 0) return m;
  std::vector<double> cost(static_cast<size_t>(n) * n, kNoneCost);
  for (int i = 0; i < ng; ++i) {
    for (int j = 0; j < np; ++j) cost[static_cast<size_t>(i) * n + j] = box_cost(gt[i], pred[j]);
  }
  const std::vector<int> assign = hungarian(cost, n);
  for (int i = 0; i < n; ++i) {
    const int g = i < ng ? i : -1;
    const int p = assign[i] < np ? assign[i] : -1;
    if (g < 0 && p < 0) continue;
    m.pairs.emplace_back(g, p);
    if (g >= 0 && p >= 0) m.cost += cost[static_cast<size_t>(i) * n + assign[i]];
  }
  return m;
}

double Prf::precision() const { return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
double Prf::recall() const { return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double Prf::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}
Prf& Prf::operator+=(const Prf& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  return *this;
}
json Prf::to_json() const {
  return {{"precision", precision()}, {"recall", recall()}, {"f1", f1()}, {"tp", tp}, {"fp", fp}, {"fn", fn}};
}

namespace {

std::vector<const Loop*> all_loops(const Sketch& s) {
  std::vector<const Loop*> out;
  for (const Face& f : s.faces) {
    for (const Loop& l : f.loops) out.push_back(&l);
  }
  return out;
}

void count_unmatched_loop(const Loop& l, bool gt_side, CurveCounts& c) {
  for (const Curve& cv : l.curves) {
    Prf& p = c[static_cast<int>(curve_type(cv))];
    (gt_side ? p.fn : p.fp) += 1;
  }
}

void count_unmatched_sketch(const Sketch& s, bool gt_side, CurveCounts& c) {
  for (const Loop* l : all_loops(s)) count_unmatched_loop(*l, gt_side, c);
}

void count_loops(const Loop& g, const Loop& p, CurveCounts& c) {
  std::vector<Box2> gb, pb;
  for (const Curve& cv : g.curves) gb.push_back(curve_bbox(cv));
  for (const Curve& cv : p.curves) pb.push_back(curve_bbox(cv));
  for (const auto& [gi, pi] : match_entity_list(gb, pb).pairs) {
    if (gi >= 0 && pi >= 0) {
      const int tg = static_cast<int>(curve_type(g.curves[gi]));
      const int tp = static_cast<int>(curve_type(p.curves[pi]));
      if (tg == tp) {
        c[tg].tp += 1;
      } else {
        c[tg].fn += 1;
        c[tp].fp += 1;
      }
    } else if (gi >= 0) {
      c[static_cast<int>(curve_type(g.curves[gi]))].fn += 1;
    } else {
      c[static_cast<int>(curve_type(p.curves[pi]))].fp += 1;
    }
  }
}

}  // namespace

CurveCounts curve_f1(const std::vector<std::optional<Sketch>>& gt, const std::vector<std::optional<Sketch>>& pred) {
  CurveCounts c;
  const size_t n = std::max(gt.size(), pred.size());
  for (size_t s = 0; s < n; ++s) {
    const Sketch* g = s < gt.size() && gt[s] ? &*gt[s] : nullptr;
    const Sketch* p = s < pred.size() && pred[s] ? &*pred[s] : nullptr;
    if (!g && !p) continue;
    if (!p) {
      count_unmatched_sketch(*g, true, c);
      continue;
    }
    if (!g) {
      count_unmatched_sketch(*p, false, c);
      continue;
    }
    const auto gl = all_loops(*g);
    const auto pl = all_loops(*p);
    std::vector<Box2> gb, pb;
    for (const Loop* l : gl) gb.push_back(loop_bbox(*l));
    for (const Loop* l : pl) pb.push_back(loop_bbox(*l));
    for (const auto& [gi, pi] : match_entity_list(gb, pb).pairs) {
      if (gi >= 0 && pi >= 0) {
        count_loops(*gl[gi], *pl[pi], c);
      } else if (gi >= 0) {
        count_unmatched_loop(*gl[gi], true, c);
      } else {
        count_unmatched_loop(*pl[pi], false, c);
      }
    }
  }
  return c;
}

Prf extrusion_f1(int gt_count, int pred_count) {
  if (gt_count < 0 || pred_count < 0) throw DomainError("extrusion_f1: counts must be >= 0");
  Prf p;
  p.tp = std::min(gt_count, pred_count);
  p.fp = std::max(0, pred_count - gt_count);
  p.fn = std::max(0, gt_count - pred_count);
  return p;
}

double invalidity_ratio(const std::vector<bool>& valid) {
  if (valid.empty()) throw DomainError("invalidity_ratio: no samples");
  const long bad = std::count(valid.begin(), valid.end(), false);
  return 100.0 * static_cast<double>(bad) / static_cast<double>(valid.size());
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile: no values");
  if (!(p >= 0 && p <= 1)) throw DomainError("quantile: p must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Quartiles quartiles(const std::vector<double>& values) {
  return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

json EvalReport::to_json() const {
  json j = {{"samples", samples},
            {"mean_cd_x1e3", json_number(mean_cd)},
            {"median_cd_x1e3", json_number(median_cd)},
            {"cd_finite", std::isfinite(median_cd)},
            {"ir_percent", ir_percent},
            {"line", curves[0].to_json()},
            {"arc", curves[1].to_json()},
            {"circle", curves[2].to_json()},
            {"extrusion", extrusions.to_json()}};
  if (cd_ratio) j["cd_ratio_quartiles"] = {{"Q1", cd_ratio->q1}, {"Q2", cd_ratio->q2}, {"Q3", cd_ratio->q3}};
  return j;
}

EvalReport aggregate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DomainError("aggregate: no records");
  EvalReport r;
  r.samples = static_cast<int>(records.size());
  std::vector<bool> valid;
  std::vector<double> cds, ratios;
  for (const EvalRecord& e : records) {
    valid.push_back(e.valid);
    if (e.valid) cds.push_back(e.cd * 1e3);
    for (int t = 0; t < 3; ++t) r.curves[t] += e.curves[t];
    r.extrusions += e.extrusions;
    if (e.cd_ratio) ratios.push_back(*e.cd_ratio);
  }
  r.ir_percent = invalidity_ratio(valid);
  if (cds.empty()) {
    r.mean_cd = r.median_cd = std::numeric_limits<double>::infinity();
  } else {
    double sum = 0.0;
    for (double c : cds) sum += c;
    r.mean_cd = sum / static_cast<double>(cds.size());
    r.median_cd = quantile(cds, 0.5);
  }
  if (!ratios.empty()) r.cd_ratio = quartiles(ratios);
  return r;
}

EvalRecord evaluate_prediction(const std::string& id, const CadProgram& gt, const std::vector<Token2D>& pred,
                               int eval_points, std::uint64_t seed) {
  EvalRecord rec;
  rec.id = id;
  const LenientSplit split = split_lenient(pred);
  std::vector<std::optional<Sketch>> gs;
  for (const DesignStep& s : gt.steps) gs.emplace_back(s.sketch);
  rec.curves = curve_f1(gs, split.sketches);
  rec.extrusions = extrusion_f1(static_cast<int>(gt.steps.size()), split.extrusion_count);
  std::optional<CadProgram> prog;
  try {
    prog = tokens_to_program(pred);
  } catch (const SyntaxError&) {
    return rec;
  }
  const SolidSample p = evaluate_program(*prog, eval_points, seed);
  if (!p.valid) return rec;
  const SolidSample g = evaluate_program(gt, eval_points, seed);
  if (!g.valid) throw ValidationError(id + ": ground-truth program is invalid: " + g.diagnosis);
  rec.valid = true;
  rec.cd = chamfer(normalize_to_unit_box(p.points), normalize_to_unit_box(g.points));
  return rec;
}

}  // namespace cadsig
