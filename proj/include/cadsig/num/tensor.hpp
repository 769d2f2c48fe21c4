#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to its Vars. backward() walks the
// tape in reverse and accumulates gradients into each node and, for parameter
// leaves, into Parameter::grad. A non-recording tape only computes values.

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cadsig/errors.hpp"

namespace cadsig::num {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Additive mask value standing in for minus infinity.
inline constexpr double kMaskValue = -1e9;

template <class T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;

  Parameter() = default;
  Parameter(std::string n, Mat<T> v) : name(std::move(n)), value(std::move(v)), grad(Mat<T>::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  long size() const { return value.size(); }
};

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Mat<T>& value() const { return tape->value(*this); }
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
};

template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  Var<T> constant(Mat<T> value);
  Var<T> param(Parameter<T>& p);

  /// Registers an op result. `parents` decide whether the node needs a gradient.
  Var<T> push(Mat<T> value, std::initializer_list<Var<T>> parents, Backward backward);
  Var<T> push(Mat<T> value, const std::vector<Var<T>>& parents, Backward backward);

  const Mat<T>& value(Var<T> v) const { return nodes_[v.id].value; }
  const Mat<T>& value(int id) const { return nodes_[id].value; }
  const Mat<T>& grad(int id) const { return nodes_[id].grad; }
  bool needs_grad(Var<T> v) const { return nodes_[v.id].needs_grad; }

  /// Adds `delta` to the gradient of node `id` when it participates in backprop.
  template <class Expr>
  void accumulate(int id, const Expr& delta) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates.
  void backward(Var<T> loss);

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
  bool recording_;
};

// ---------------------------------------------------------------------------
// Operations. All inputs must live on the same tape.

/// a * b, or a * b^T when transpose_b.
template <class T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_b = false);
template <class T>
Var<T> add(Var<T> a, Var<T> b);
template <class T>
Var<T> sub(Var<T> a, Var<T> b);
/// Adds a 1 x n row to every row of a.
template <class T>
Var<T> add_row(Var<T> a, Var<T> row);
template <class T>
Var<T> mul(Var<T> a, Var<T> b);
template <class T>
Var<T> scale(Var<T> a, T s);
template <class T>
Var<T> relu(Var<T> a);
/// Row-wise layer normalization with 1 x n gain and bias.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));
/// Row-wise softmax of (scores + mask); mask entries are 0 or kMaskValue.
template <class T>
Var<T> softmax_with_additive_mask(Var<T> scores, const Mat<T>& mask);
template <class T>
Var<T> softmax(Var<T> scores);
/// Inverted dropout; identity when p == 0.
template <class T>
Var<T> dropout(Var<T> a, T p, std::mt19937_64& rng);
/// Row i = sum of weight rows listed in rows[i] (entries < 0 are skipped).
/// Equivalent to multiplying a multi-hot matrix by `weight`.
template <class T>
Var<T> embedding_projection(Var<T> weight, const std::vector<std::array<int, 2>>& rows);
template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <class T>
Var<T> slice_cols(Var<T> a, long begin, long count);
template <class T>
Var<T> gather_rows(Var<T> a, const std::vector<int>& index);
/// Softmax over consecutive groups of k rows, independently per column.
template <class T>
Var<T> segment_softmax(Var<T> a, int k);
/// Sum over consecutive groups of k rows.
template <class T>
Var<T> segment_sum(Var<T> a, int k);
/// Row i taken from a when take_a[i], else from b.
template <class T>
Var<T> select_rows(Var<T> a, Var<T> b, const std::vector<bool>& take_a);
/// Sum over rows of weight[i] * cross_entropy(softmax(logits[i]), target[i]); rows with
/// weight 0 are ignored. Returns a 1 x 1 Var.
template <class T>
Var<T> cross_entropy_from_logits(Var<T> logits, const std::vector<int>& target,
                                 const std::vector<T>& weight);

/// Numerically stable row-wise log-softmax (no tape).
template <class T>
Mat<T> log_softmax_rows(const Mat<T>& logits);

}  // namespace cadsig::num
