#include "cadsig/net.hpp"

#include <algorithm>
#include <cmath>

#include "cadsig/geom.hpp"
#include "cadsig/spatial.hpp"
#include "cadsig/synth.hpp"

namespace cadsig {

using nlohmann::json;

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "tiny") return c;
  if (name == "desk") {
    c.blocks = 4;
    c.heads = 4;
    c.d_model = 64;
    c.ffn = 256;
    c.ca_skip = 1;
    return c;
  }
  if (name == "full") {
    c.blocks = 8;
    c.heads = 8;
    c.d_model = 128;
    c.ffn = 2048;
    c.ca_skip = 2;
    c.dropout = 0.1;
    return c;
  }
  if (name == "gradcheck") {
    c.blocks = 2;
    c.heads = 2;
    c.d_model = 16;
    c.ffn = 32;
    c.ca_skip = 0;
    c.head_init_scale = 1.0;
    return c;
  }
  throw ValidationError("unknown model preset '" + name + "' (tiny, desk, full, gradcheck)");
}

json ModelConfig::to_json() const {
  return {{"blocks", blocks},
          {"heads", heads},
          {"d_model", d_model},
          {"d_point0", d_point0},
          {"ffn", ffn},
          {"k_nn", k_nn},
          {"extra_features", extra_features},
          {"ca_skip", ca_skip},
          {"dropout", dropout},
          {"sga", sga},
          {"post_norm_ffn", post_norm_ffn},
          {"additive_pad", additive_pad},
          {"head_init_scale", head_init_scale}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.blocks = j.value("blocks", c.blocks);
    c.heads = j.value("heads", c.heads);
    c.d_model = j.value("d_model", c.d_model);
    c.d_point0 = j.value("d_point0", c.d_point0);
    c.ffn = j.value("ffn", c.ffn);
    c.k_nn = j.value("k_nn", c.k_nn);
    c.extra_features = j.value("extra_features", c.extra_features);
    c.ca_skip = j.value("ca_skip", c.ca_skip);
    c.dropout = j.value("dropout", c.dropout);
    c.sga = j.value("sga", c.sga);
    c.post_norm_ffn = j.value("post_norm_ffn", c.post_norm_ffn);
    c.additive_pad = j.value("additive_pad", c.additive_pad);
    c.head_init_scale = j.value("head_init_scale", c.head_init_scale);
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed model config: ") + ex.what());
  }
  c.validate();
  return c;
}

std::string ModelConfig::hash() const { return fnv1a_hex(to_json().dump()); }

void ModelConfig::validate() const {
  if (blocks < 1 || heads < 1 || d_model < 1 || ffn < 1 || d_point0 < 1) {
    throw ValidationError("model dimensions must be positive");
  }
  if (d_model % heads != 0) throw ValidationError("d_model must be divisible by heads");
  if (ca_skip < 0 || ca_skip >= blocks) throw ValidationError("ca_skip must satisfy 0 <= ca_skip < blocks");
  if (k_nn < 1) throw ValidationError("k_nn must be positive");
  if (extra_features < 0) throw ValidationError("extra_features must be >= 0");
  if (!(dropout >= 0 && dropout < 1)) throw ValidationError("dropout must be in [0, 1)");
}

namespace net {

using num::Parameter;

std::vector<bool> sketch_rows(const std::vector<Token2D>& tokens) {
  const TokenAnnotation ann = annotate(tokens);
  std::vector<bool> rows(tokens.size(), false);
  for (size_t i = 0; i < tokens.size(); ++i) {
    rows[i] = tokens[i].a == vocab::kEndExtrude || (ann.is_sketch[i] && tokens[i].a != vocab::kEndSketch);
  }
  return rows;
}

template <class T>
Mat<T> build_sga_mask(const std::vector<Token2D>& tokens, const std::vector<bool>& rows,
                      const StepInstances& instances, int n_points) {
  const TokenAnnotation ann = annotate(tokens);
  Mat<T> mask = Mat<T>::Zero(static_cast<long>(tokens.size()), n_points);
  for (size_t i = 0; i < tokens.size() && i < rows.size(); ++i) {
    if (!rows[i]) continue;
    const int step = ann.steps[i];
    if (step < 1 || step > static_cast<int>(instances.size())) continue;
    const auto& inst = instances[step - 1];
    if (!inst || inst->empty()) continue;
    mask.row(static_cast<long>(i)).setConstant(static_cast<T>(num::kMaskValue));
    for (int p : *inst) mask(static_cast<long>(i), p) = T(0);
  }
  return mask;
}

// ---------------------------------------------------------------------------

namespace {
enum InitMode { kXavier = 0, kZero = 1, kOne = 2, kNormal = 3 };
}

template <class T>
Parameter<T>* Model<T>::make(const std::string& name, long rows, long cols, T init_scale, int mode) {
  Mat<T> v(rows, cols);
  switch (mode) {
    case kXavier: {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols)) * static_cast<double>(init_scale);
      std::uniform_real_distribution<double> u(-a, a);
      for (long i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(u(init_rng_));
      break;
    }
    case kZero: v.setZero(); break;
    case kOne: v.setOnes(); break;
    default: {
      std::normal_distribution<double> n(0.0, static_cast<double>(init_scale));
      for (long i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(n(init_rng_));
    }
  }
  params_.push_back(std::make_unique<Parameter<T>>(name, std::move(v)));
  return params_.back().get();
}

template <class T>
typename Model<T>::Linear Model<T>::linear(const std::string& name, int in, int out, T scale) {
  Linear l;
  l.w = make(name + ".w", in, out, scale, kXavier);
  l.b = make(name + ".b", 1, out, T(0), kZero);
  return l;
}

template <class T>
typename Model<T>::Norm Model<T>::norm(const std::string& name, int d) {
  return {make(name + ".gain", 1, d, T(1), kOne), make(name + ".bias", 1, d, T(0), kZero)};
}

template <class T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), init_rng_(seed) {
  cfg_.validate();
  const int d = cfg_.d_model;
  point_in_ = linear("points.in", 3 + cfg_.extra_features, cfg_.d_point0);
  auto lfa = [&](const std::string& name, int in, int out) {
    Lfa l;
    l.score = {make(name + ".score.w", in, in, T(0), kZero), make(name + ".score.b", 1, in, T(0), kZero)};
    l.out = linear(name + ".out", in, out);
    return l;
  };
  lfa1_ = lfa("points.lfa1", cfg_.d_point0, d);
  lfa2_ = lfa("points.lfa2", d, d);
  token_w_ = make("tokens.w", 2 * vocab::kSize, d, T(0.02), kNormal);
  flag_w_ = make("tokens.flag", 1, d, T(0.02), kNormal);
  step_w_ = make("tokens.step", 1, d, T(0.02), kNormal);
  token_b_ = make("tokens.b", 1, d, T(0), kZero);
  pos_ = make("tokens.pos", vocab::kMaxTokens, d, T(0.02), kNormal);
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string p = "blocks." + std::to_string(b);
    Block blk;
    blk.self = {linear(p + ".self.q", d, d), linear(p + ".self.k", d, d), linear(p + ".self.v", d, d),
                linear(p + ".self.o", d, d)};
    blk.norm1 = norm(p + ".norm1", d);
    blk.lfa = lfa(p + ".lfa", d, d);
    blk.cross = b >= cfg_.ca_skip;
    if (blk.cross) {
      blk.ca = {linear(p + ".cross.q", d, d), linear(p + ".cross.k", d, d), linear(p + ".cross.v", d, d),
                linear(p + ".cross.o", d, d)};
      for (int r = 0; r < 4; ++r) blk.refine[r] = linear(p + ".refine." + std::to_string(r), d, d);
      blk.norm2 = norm(p + ".norm2", d);
    }
    blk.ff1 = linear(p + ".ff1", d, cfg_.ffn);
    blk.ff2 = linear(p + ".ff2", cfg_.ffn, d);
    if (cfg_.post_norm_ffn) blk.norm3 = norm(p + ".norm3", d);
    blocks_.push_back(blk);
  }
  head_x_ = linear("head.x", d, vocab::kSize, static_cast<T>(cfg_.head_init_scale));
  head_y_ = linear("head.y", d, vocab::kSize, static_cast<T>(cfg_.head_init_scale));
}

template <class T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

template <class T>
long Model<T>::parameter_count() const {
  long n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

template <class T>
Var<T> Model<T>::apply(Tape<T>& t, const Linear& l, Var<T> x) const {
  return num::add_row(num::matmul(x, t.param(*l.w)), t.param(*l.b));
}

template <class T>
Var<T> Model<T>::apply_norm(Tape<T>& t, const Norm& n, Var<T> x) const {
  return num::layer_norm(x, t.param(*n.gain), t.param(*n.bias));
}

template <class T>
Var<T> Model<T>::apply_lfa(Tape<T>& t, const Lfa& l, Var<T> f, const std::vector<int>& knn) const {
  const Var<T> g = num::gather_rows(f, knn);
  const Var<T> w = num::segment_softmax(apply(t, l.score, g), cfg_.k_nn);
  const Var<T> pooled = num::segment_sum(num::mul(w, g), cfg_.k_nn);
  return num::relu(apply(t, l.out, pooled));
}

template <class T>
Var<T> Model<T>::maybe_dropout(Var<T> x, bool train, std::mt19937_64* rng) const {
  if (!train || cfg_.dropout <= 0 || rng == nullptr) return x;
  return num::dropout(x, static_cast<T>(cfg_.dropout), *rng);
}

template <class T>
Var<T> Model<T>::attend(Tape<T>&, Var<T> q, Var<T> k, Var<T> v, const Mat<T>& mask, bool, std::mt19937_64*,
                        std::vector<Mat<T>>* probs) const {
  const long dh = cfg_.d_model / cfg_.heads;
  const T s = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Var<T>> heads;
  for (int h = 0; h < cfg_.heads; ++h) {
    const Var<T> qh = num::slice_cols(q, h * dh, dh);
    const Var<T> kh = num::slice_cols(k, h * dh, dh);
    const Var<T> vh = num::slice_cols(v, h * dh, dh);
    const Var<T> p = num::softmax_with_additive_mask(num::scale(num::matmul(qh, kh, true), s), mask);
    if (probs) probs->push_back(p.value());
    heads.push_back(num::matmul(p, vh));
  }
  return heads.size() == 1 ? heads[0] : num::concat_cols(heads);
}

template <class T>
PointFeatures<T> Model<T>::encode_points(Tape<T>& t, const Mat<T>& cloud, bool train, std::mt19937_64* rng) {
  const long n = cloud.rows();
  if (cloud.cols() != 3 + cfg_.extra_features) {
    throw ShapeError("encode_points: cloud has " + std::to_string(cloud.cols()) + " columns, model expects " +
                     std::to_string(3 + cfg_.extra_features));
  }
  if (n < cfg_.k_nn + 1) {
    throw ShapeError("encode_points: need at least " + std::to_string(cfg_.k_nn + 1) + " points, got " +
                     std::to_string(n));
  }
  Points xyz = cloud.leftCols(3).template cast<double>();
  const std::vector<int> knn = knn_graph(xyz, cfg_.k_nn);
  Var<T> f = num::relu(apply(t, point_in_, t.constant(cloud)));
  f = apply_lfa(t, lfa1_, f, knn);
  f = apply_lfa(t, lfa2_, f, knn);
  PointFeatures<T> out;
  out.n_points = static_cast<int>(n);
  for (const Block& blk : blocks_) {
    f = apply_lfa(t, blk.lfa, f, knn);
    if (!blk.cross) continue;
    Var<T> r = f;
    for (int i = 0; i < 4; ++i) {
      r = apply(t, blk.refine[i], r);
      if (i < 3) r = num::relu(r);
    }
    out.kv.push_back({apply(t, blk.ca.k, f), apply(t, blk.ca.v, f), apply(t, blk.ca.k, r), apply(t, blk.ca.v, r)});
  }
  (void)train;
  (void)rng;
  return out;
}

template <class T>
PointCache<T> Model<T>::detach(const PointFeatures<T>& f) const {
  PointCache<T> c;
  c.n_points = f.n_points;
  for (const auto& kv : f.kv) c.kv.push_back({kv[0].value(), kv[1].value(), kv[2].value(), kv[3].value()});
  return c;
}

template <class T>
PointFeatures<T> Model<T>::attach(Tape<T>& t, const PointCache<T>& c) const {
  PointFeatures<T> f;
  f.n_points = c.n_points;
  for (const auto& kv : c.kv) {
    f.kv.push_back({t.constant(kv[0]), t.constant(kv[1]), t.constant(kv[2]), t.constant(kv[3])});
  }
  return f;
}

template <class T>
Logits<T> Model<T>::decode_tokens(Tape<T>& t, const PointFeatures<T>& points, const std::vector<Token2D>& tokens,
                                  const StepInstances& instances, int true_len, bool train, std::mt19937_64* rng,
                                  AttentionTrace<T>* trace) {
  const long n = static_cast<long>(tokens.size());
  if (n < 1 || n > vocab::kMaxTokens) {
    throw ShapeError("decode_tokens: " + std::to_string(n) + " tokens, expected 1..273");
  }
  const long tl = true_len < 0 ? n : std::min<long>(true_len, n);
  const std::vector<Token2D> real(tokens.begin(), tokens.begin() + tl);
  const TokenAnnotation ann = annotate(real);

  std::vector<std::array<int, 2>> rows(n, {-1, -1});
  Mat<T> flags = Mat<T>::Constant(n, 1, static_cast<T>(vocab::kPadFlag));
  Mat<T> steps = Mat<T>::Zero(n, 1);
  for (long i = 0; i < tl; ++i) {
    rows[i] = {tokens[i].a, vocab::kSize + tokens[i].b};
    flags(i, 0) = static_cast<T>(ann.flags[i]);
    steps(i, 0) = static_cast<T>(ann.steps[i]);
  }
  std::vector<int> positions(n);
  for (long i = 0; i < n; ++i) positions[i] = static_cast<int>(i);

  Var<T> x = num::embedding_projection(t.param(*token_w_), rows);
  x = num::add(x, num::matmul(t.constant(flags), t.param(*flag_w_)));
  x = num::add(x, num::matmul(t.constant(steps), t.param(*step_w_)));
  x = num::add_row(x, t.param(*token_b_));
  x = num::add(x, num::gather_rows(t.param(*pos_), positions));
  if (cfg_.additive_pad && tl < n) {
    Mat<T> pad = Mat<T>::Zero(n, cfg_.d_model);
    pad.bottomRows(n - tl).setConstant(static_cast<T>(num::kMaskValue));
    x = num::add(x, t.constant(pad));
  }

  const T masked = static_cast<T>(num::kMaskValue);
  Mat<T> causal = Mat<T>::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      if (j > i || j >= tl) causal(i, j) = masked;
    }
  }
  std::vector<bool> sga_rows = sketch_rows(real);
  sga_rows.resize(n, false);
  const bool any_sga = cfg_.sga && std::find(sga_rows.begin(), sga_rows.end(), true) != sga_rows.end();
  Mat<T> sga_mask;
  if (any_sga) sga_mask = build_sga_mask<T>(real, sga_rows, instances, points.n_points);
  if (any_sga && sga_mask.rows() < n) sga_mask.conservativeResizeLike(Mat<T>::Zero(n, points.n_points));
  const Mat<T> open = Mat<T>::Zero(n, points.n_points);
  if (trace) trace->sga_rows = sga_rows;

  size_t ca_index = 0;
  for (const Block& blk : blocks_) {
    Var<T> h = attend(t, apply(t, blk.self.q, x), apply(t, blk.self.k, x), apply(t, blk.self.v, x), causal, train,
                      rng, nullptr);
    h = maybe_dropout(apply(t, blk.self.o, h), train, rng);
    x = apply_norm(t, blk.norm1, num::add(x, h));
    if (blk.cross) {
      const auto& kv = points.kv.at(ca_index++);
      const Var<T> q = apply(t, blk.ca.q, x);
      Var<T> c = attend(t, q, kv[0], kv[1], open, train, rng, nullptr);
      if (any_sga) {
        const Var<T> guided =
            attend(t, q, kv[2], kv[3], sga_mask, train, rng, trace ? &trace->sga_probs : nullptr);
        c = num::select_rows(guided, c, sga_rows);
      }
      c = maybe_dropout(apply(t, blk.ca.o, c), train, rng);
      x = apply_norm(t, blk.norm2, num::add(x, c));
    }
    Var<T> ff = apply(t, blk.ff2, num::relu(apply(t, blk.ff1, x)));
    x = num::add(x, maybe_dropout(ff, train, rng));
    if (cfg_.post_norm_ffn) x = apply_norm(t, blk.norm3, x);
  }
  return {apply(t, head_x_, x), apply(t, head_y_, x)};
}

template <class T>
DecodeState<T> Model<T>::begin_decode(PointCache<T> points) const {
  DecodeState<T> s;
  s.points = std::move(points);
  s.keys.assign(blocks_.size(), Mat<T>(0, cfg_.d_model));
  s.values.assign(blocks_.size(), Mat<T>(0, cfg_.d_model));
  return s;
}

template <class T>
std::pair<Mat<T>, Mat<T>> Model<T>::extend(DecodeState<T>& state, const std::vector<Token2D>& tokens,
                                           const StepInstances& instances) {
  if (tokens.size() > static_cast<size_t>(vocab::kMaxTokens)) {
    throw ShapeError("extend: " + std::to_string(tokens.size()) + " tokens, expected at most 273");
  }
  if (tokens.size() <= state.tokens.size() ||
      !std::equal(state.tokens.begin(), state.tokens.end(), tokens.begin())) {
    throw ValidationError("extend: tokens must strictly extend the decoded prefix");
  }
  const TokenAnnotation ann = annotate(tokens);
  const std::vector<bool> sga_rows = sketch_rows(tokens);
  const T masked = static_cast<T>(num::kMaskValue);
  const int n_points = state.points.n_points;
  std::pair<Mat<T>, Mat<T>> out;
  for (size_t i = state.tokens.size(); i < tokens.size(); ++i) {
    Tape<T> t(false);
    Mat<T> flag(1, 1), step(1, 1);
    flag(0, 0) = static_cast<T>(ann.flags[i]);
    step(0, 0) = static_cast<T>(ann.steps[i]);
    Var<T> x = num::embedding_projection(t.param(*token_w_), {{tokens[i].a, vocab::kSize + tokens[i].b}});
    x = num::add(x, num::matmul(t.constant(flag), t.param(*flag_w_)));
    x = num::add(x, num::matmul(t.constant(step), t.param(*step_w_)));
    x = num::add_row(x, t.param(*token_b_));
    x = num::add(x, num::gather_rows(t.param(*pos_), {static_cast<int>(i)}));

    const bool guided = cfg_.sga && sga_rows[i];
    Mat<T> sga_mask = Mat<T>::Zero(1, n_points);
    if (guided) {
      const int s = ann.steps[i];
      if (s >= 1 && s <= static_cast<int>(instances.size()) && instances[s - 1] && !instances[s - 1]->empty()) {
        sga_mask.setConstant(masked);
        for (int p : *instances[s - 1]) sga_mask(0, p) = T(0);
      }
    }
    const Mat<T> open = Mat<T>::Zero(1, n_points);
    const long rows = static_cast<long>(i) + 1;
    size_t ca_index = 0;
    for (size_t b = 0; b < blocks_.size(); ++b) {
      const Block& blk = blocks_[b];
      Mat<T>& K = state.keys[b];
      Mat<T>& V = state.values[b];
      K.conservativeResize(rows, Eigen::NoChange);
      V.conservativeResize(rows, Eigen::NoChange);
      K.row(rows - 1) = apply(t, blk.self.k, x).value().row(0);
      V.row(rows - 1) = apply(t, blk.self.v, x).value().row(0);
      Var<T> h = attend(t, apply(t, blk.self.q, x), t.constant(K), t.constant(V), Mat<T>::Zero(1, rows), false,
                        nullptr, nullptr);
      x = apply_norm(t, blk.norm1, num::add(x, apply(t, blk.self.o, h)));
      if (blk.cross) {
        const auto& kv = state.points.kv.at(ca_index++);
        const Var<T> q = apply(t, blk.ca.q, x);
        const Var<T> c = guided ? attend(t, q, t.constant(kv[2]), t.constant(kv[3]), sga_mask, false, nullptr, nullptr)
                                : attend(t, q, t.constant(kv[0]), t.constant(kv[1]), open, false, nullptr, nullptr);
        x = apply_norm(t, blk.norm2, num::add(x, apply(t, blk.ca.o, c)));
      }
      x = num::add(x, apply(t, blk.ff2, num::relu(apply(t, blk.ff1, x))));
      if (cfg_.post_norm_ffn) x = apply_norm(t, blk.norm3, x);
    }
    out = {apply(t, head_x_, x).value(), apply(t, head_y_, x).value()};
    state.tokens.push_back(tokens[i]);
  }
  return out;
}

template <class T>
void Model<T>::write_weights(num::CheckpointWriter& w) const {
  for (const auto& p : params_) w.add("param/" + p->name, p->value);
}

template <class T>
void Model<T>::read_weights(const num::CheckpointReader& r) {
  for (auto& p : params_) r.load_into("param/" + p->name, p->value);
}

template <class T>
void Model<T>::save(const std::filesystem::path& path, const json& extra) const {
  num::CheckpointWriter w;
  write_weights(w);
  json meta = extra.is_object() ? extra : json::object();
  meta["model_config"] = cfg_.to_json();
  meta["model_config_hash"] = cfg_.hash();
  w.write(path, meta);
}

template <class T>
void Model<T>::load(const std::filesystem::path& path) {
  num::CheckpointReader r(path);
  const std::string stored = r.meta().value("model_config_hash", std::string());
  if (stored != cfg_.hash()) {
    throw ValidationError(path.string() + ": model config hash " + stored + " does not match " + cfg_.hash());
  }
  read_weights(r);
}

template class Model<float>;
template class Model<double>;
template Mat<float> build_sga_mask<float>(const std::vector<Token2D>&, const std::vector<bool>&,
                                          const StepInstances&, int);
template Mat<double> build_sga_mask<double>(const std::vector<Token2D>&, const std::vector<bool>&,
                                            const StepInstances&, int);

}  // namespace net
}  // namespace cadsig
