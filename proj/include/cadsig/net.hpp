#pragma once

// Auto-regressive multi-modal transformer over CAD tokens and point features.
//
// Points: Linear(3+f -> 16) + ReLU, two local-feature-aggregation (LFA) layers to
// width d. Tokens: multi-hot (a, V+b) projection + flag and step columns + learned
// positions. Each block: causal self-attention + AddNorm, an LFA step on the point
// features, cross-attention (from block ca_skip on) + AddNorm where rows that emit
// sketch tokens attend only to their sketch instance through refined features, and
// a residual feed-forward layer. Two linear heads predict the a and b components
// of the next token.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/cad_lang.hpp"
#include "cadsig/num/checkpoint.hpp"
#include "cadsig/num/tensor.hpp"

namespace cadsig {

struct ModelConfig {
  int blocks = 2;
  int heads = 2;
  int d_model = 32;
  int d_point0 = 16;
  int ffn = 64;
  int k_nn = 4;
  int extra_features = 3;  // normals
  int ca_skip = 1;         // blocks without cross-attention
  double dropout = 0.0;
  bool sga = true;            // sketch-instance masking in cross-attention
  bool post_norm_ffn = false;  // LayerNorm after the feed-forward residual
  bool additive_pad = false;   // add the mask constant to padded embedding rows instead of zeroing them
  double head_init_scale = 0.01;

  static ModelConfig preset(const std::string& name);
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  std::string hash() const;
  void validate() const;
};

namespace net {

template <class T>
using Mat = num::Mat<T>;
template <class T>
using Var = num::Var<T>;
template <class T>
using Tape = num::Tape<T>;

/// Point-side tensors consumed by cross-attention in each block.
template <class T>
struct PointFeatures {
  // Per block with cross-attention: K, V of plain features, K, V of refined features.
  std::vector<std::array<Var<T>, 4>> kv;
  int n_points = 0;
};

/// Values of PointFeatures detached from any tape (decode-time cache).
template <class T>
struct PointCache {
  std::vector<std::array<Mat<T>, 4>> kv;
  int n_points = 0;
};

/// Sketch instance per design step (index step-1); nullopt or empty = unmasked.
using StepInstances = std::vector<std::optional<std::vector<int>>>;

/// Optional capture of cross-attention probabilities for SGA rows (per block, per head).
template <class T>
struct AttentionTrace {
  std::vector<Mat<T>> sga_probs;
  std::vector<bool> sga_rows;
};

/// Incremental decoding state: per-block self-attention keys/values of the rows
/// decoded so far plus the cached point-side tensors.
template <class T>
struct DecodeState {
  PointCache<T> points;
  std::vector<Mat<T>> keys, values;
  std::vector<Token2D> tokens;
};

template <class T>
struct Logits {
  Var<T> ox;  // n x V
  Var<T> oy;  // n x V
};

/// Row i emits a sketch token when token i is e_e or a sketch token other than e_s.
std::vector<bool> sketch_rows(const std::vector<Token2D>& tokens);

/// Dense SGA mask: rows flagged in `rows` get 0 at their step's instance points and
/// the mask constant elsewhere; every other row, and rows whose step has no (or an
/// empty) instance, is all zero.
template <class T>
Mat<T> build_sga_mask(const std::vector<Token2D>& tokens, const std::vector<bool>& rows,
                      const StepInstances& instances, int n_points);

template <class T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<num::Parameter<T>*> parameters();
  long parameter_count() const;

  /// cloud: N x (3 + extra_features). Neighbors come from the xyz columns.
  PointFeatures<T> encode_points(Tape<T>& tape, const Mat<T>& cloud, bool train = false,
                                 std::mt19937_64* rng = nullptr);
  PointCache<T> detach(const PointFeatures<T>& f) const;
  PointFeatures<T> attach(Tape<T>& tape, const PointCache<T>& cache) const;

  /// Logits for every input row. `true_len` < tokens.size() marks trailing rows as padding.
  Logits<T> decode_tokens(Tape<T>& tape, const PointFeatures<T>& points, const std::vector<Token2D>& tokens,
                          const StepInstances& instances, int true_len = -1, bool train = false,
                          std::mt19937_64* rng = nullptr, AttentionTrace<T>* trace = nullptr);

  DecodeState<T> begin_decode(PointCache<T> points) const;
  /// Runs the rows of `tokens` beyond state.tokens one at a time (tokens must extend
  /// state.tokens) and returns the a/b logits of the last row, each 1 x V. Matches
  /// decode_tokens on the same unpadded sequence.
  std::pair<Mat<T>, Mat<T>> extend(DecodeState<T>& state, const std::vector<Token2D>& tokens,
                                   const StepInstances& instances);

  /// Adds every parameter as "param/<name>".
  void write_weights(num::CheckpointWriter& w) const;
  void read_weights(const num::CheckpointReader& r);
  /// Standalone weight file with the model config in its header.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  /// Throws ValidationError when the stored config hash differs from this model's.
  void load(const std::filesystem::path& path);

 private:
  struct Linear {
    num::Parameter<T>* w = nullptr;
    num::Parameter<T>* b = nullptr;
  };
  struct Norm {
    num::Parameter<T>* gain = nullptr;
    num::Parameter<T>* bias = nullptr;
  };
  struct Lfa {
    Linear score, out;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct Block {
    Attention self;
    Norm norm1;
    Lfa lfa;
    bool cross = false;
    Attention ca;
    std::array<Linear, 4> refine;
    Norm norm2;
    Linear ff1, ff2;
    Norm norm3;
  };

  num::Parameter<T>* make(const std::string& name, long rows, long cols, T init_scale, int mode);
  Linear linear(const std::string& name, int in, int out, T scale = T(1));
  Norm norm(const std::string& name, int d);

  Var<T> apply(Tape<T>& t, const Linear& l, Var<T> x) const;
  Var<T> apply_norm(Tape<T>& t, const Norm& n, Var<T> x) const;
  Var<T> apply_lfa(Tape<T>& t, const Lfa& l, Var<T> f, const std::vector<int>& knn) const;
  Var<T> attend(Tape<T>& t, Var<T> q, Var<T> k, Var<T> v, const Mat<T>& mask, bool train, std::mt19937_64* rng,
                std::vector<Mat<T>>* probs) const;
  Var<T> maybe_dropout(Var<T> x, bool train, std::mt19937_64* rng) const;

  ModelConfig cfg_;
  std::mt19937_64 init_rng_;
  std::vector<std::unique_ptr<num::Parameter<T>>> params_;
  Linear point_in_;
  Lfa lfa1_, lfa2_;
  num::Parameter<T>* token_w_ = nullptr;
  num::Parameter<T>* flag_w_ = nullptr;
  num::Parameter<T>* step_w_ = nullptr;
  num::Parameter<T>* token_b_ = nullptr;
  num::Parameter<T>* pos_ = nullptr;
  std::vector<Block> blocks_;
  Linear head_x_, head_y_;
};

}  // namespace net
}  // namespace cadsig
