#include "cadsig/num/tensor.hpp"

#include <cmath>

namespace cadsig::num {

namespace {

std::string shape(long r, long c) { return "(" + std::to_string(r) + "x" + std::to_string(c) + ")"; }

template <class T>
std::string shape(const Mat<T>& m) {
  return shape(m.rows(), m.cols());
}

template <class T>
void same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape != b.tape) throw ShapeError(std::string(op) + ": operands live on different tapes");
}

template <class T>
void same_shape(const Mat<T>& a, const Mat<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

}  // namespace

template <class T>
Var<T> Tape<T>::constant(Mat<T> value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var<T> Tape<T>::param(Parameter<T>& p) {
  if (!recording_) return constant(p.value);
  Parameter<T>* target = &p;
  nodes_.push_back(Node{p.value, {}, [target](Tape& t, int self) { target->grad += t.grad(self); }, true});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var<T> Tape<T>::push(Mat<T> value, std::initializer_list<Var<T>> parents, Backward backward) {
  bool needs = false;
  for (const Var<T>& p : parents) needs = needs || nodes_[p.id].needs_grad;
  needs = needs && recording_;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var<T> Tape<T>::push(Mat<T> value, const std::vector<Var<T>>& parents, Backward backward) {
  bool needs = false;
  for (const Var<T>& p : parents) needs = needs || nodes_[p.id].needs_grad;
  needs = needs && recording_;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (!recording_) throw Error("backward on a non-recording tape");
  if (loss.tape != this) throw ShapeError("backward: loss lives on a different tape");
  const Mat<T>& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape(v));
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad = Mat<T>::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

// ---------------------------------------------------------------------------

template <class T>
Var<T> matmul(Var<T> a, Var<T> b, bool transpose_b) {
  same_tape(a, b, "matmul");
  const Mat<T>& A = a.value();
  const Mat<T>& B = b.value();
  const long inner = transpose_b ? B.cols() : B.rows();
  if (A.cols() != inner) {
    throw ShapeError("matmul: shape mismatch " + shape(A) + " vs " +
                     (transpose_b ? shape(B.cols(), B.rows()) : shape(B)));
  }
  Mat<T> out(A.rows(), transpose_b ? B.rows() : B.cols());
  if (transpose_b) {
    out.noalias() = A * B.transpose();
  } else {
    out.noalias() = A * B;
  }
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {a, b}, [ia, ib, transpose_b](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    const Mat<T>& A = t.value(ia);
    const Mat<T>& B = t.value(ib);
    if (transpose_b) {
      t.accumulate(ia, g * B);
      t.accumulate(ib, g.transpose() * A);
    } else {
      t.accumulate(ia, g * B.transpose());
      t.accumulate(ib, A.transpose() * g);
    }
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  same_tape(a, b, "add");
  same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() + b.value(), {a, b}, [ia, ib](Tape<T>& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  same_tape(a, b, "sub");
  same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value() - b.value(), {a, b}, [ia, ib](Tape<T>& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

template <class T>
Var<T> add_row(Var<T> a, Var<T> row) {
  same_tape(a, row, "add_row");
  const Mat<T>& A = a.value();
  const Mat<T>& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape(A) + " vs " + shape(R));
  }
  Mat<T> out = A.rowwise() + R.row(0);
  const int ia = a.id, ir = row.id;
  return a.tape->push(std::move(out), {a, row}, [ia, ir](Tape<T>& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  same_tape(a, b, "mul");
  same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  return a.tape->push(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape<T>& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
    t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
  });
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  const int ia = a.id;
  return a.tape->push(a.value() * s, {a}, [ia, s](Tape<T>& t, int self) { t.accumulate(ia, t.grad(self) * s); });
}

template <class T>
Var<T> relu(Var<T> a) {
  const int ia = a.id;
  return a.tape->push(a.value().cwiseMax(T(0)), {a}, [ia](Tape<T>& t, int self) {
    const Mat<T>& x = t.value(ia);
    t.accumulate(ia, (x.array() > T(0)).select(t.grad(self), T(0)));
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Mat<T>& X = x.value();
  const long n = X.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ShapeError("layer_norm: gain/bias " + shape(gain.value()) + " do not match " + shape(X));
  }
  Mat<T> xhat(X.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(X.rows());
  for (long r = 0; r < X.rows(); ++r) {
    const T mean = X.row(r).mean();
    const T var = (X.row(r).array() - mean).square().mean();
    inv_std[r] = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean) * inv_std[r];
  }
  Mat<T> out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return x.tape->push(std::move(out), {x, gain, bias},
                      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, int self) {
                        const Mat<T>& g = t.grad(self);
                        const Mat<T>& G = t.value(ig);
                        t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                        t.accumulate(ib, g.colwise().sum());
                        Mat<T> dxhat = g.array().rowwise() * G.row(0).array();
                        Mat<T> dx(g.rows(), g.cols());
                        for (long r = 0; r < g.rows(); ++r) {
                          const T m1 = dxhat.row(r).mean();
                          const T m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                          dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std[r];
                        }
                        t.accumulate(ix, dx);
                      });
}

namespace {

template <class T>
void softmax_in_place(Mat<T>& s) {
  for (long r = 0; r < s.rows(); ++r) {
    const T mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

template <class T>
Var<T> softmax_impl(Var<T> scores, Mat<T> p) {
  softmax_in_place(p);
  const int is = scores.id;
  return scores.tape->push(std::move(p), {scores}, [is](Tape<T>& t, int self) {
    const Mat<T>& P = t.value(self);
    const Mat<T>& g = t.grad(self);
    const auto dot = g.cwiseProduct(P).rowwise().sum();
    Mat<T> ds = P.array() * (g.colwise() - dot).array();
    t.accumulate(is, ds);
  });
}

}  // namespace

template <class T>
Var<T> softmax_with_additive_mask(Var<T> scores, const Mat<T>& mask) {
  same_shape(scores.value(), mask, "softmax_with_additive_mask");
  return softmax_impl(scores, Mat<T>(scores.value() + mask));
}

template <class T>
Var<T> softmax(Var<T> scores) {
  return softmax_impl(scores, Mat<T>(scores.value()));
}

template <class T>
Var<T> dropout(Var<T> a, T p, std::mt19937_64& rng) {
  if (p <= T(0)) return a;
  if (p >= T(1)) throw DomainError("dropout probability must be < 1");
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  Mat<T> mask(a.rows(), a.cols());
  const T s = T(1) / (T(1) - p);
  for (long i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : T(0);
  const int ia = a.id;
  Mat<T> out = a.value().cwiseProduct(mask);
  return a.tape->push(std::move(out), {a}, [ia, mask = std::move(mask)](Tape<T>& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(mask));
  });
}

template <class T>
Var<T> embedding_projection(Var<T> weight, const std::vector<std::array<int, 2>>& rows) {
  const Mat<T>& W = weight.value();
  Mat<T> out = Mat<T>::Zero(static_cast<long>(rows.size()), W.cols());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int idx : rows[r]) {
      if (idx < 0) continue;
      if (idx >= W.rows()) {
        throw ShapeError("embedding_projection: index " + std::to_string(idx) + " outside " + shape(W));
      }
      out.row(static_cast<long>(r)) += W.row(idx);
    }
  }
  const int iw = weight.id;
  return weight.tape->push(std::move(out), {weight}, [iw, rows](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    Mat<T> dw = Mat<T>::Zero(t.value(iw).rows(), t.value(iw).cols());
    for (size_t r = 0; r < rows.size(); ++r) {
      for (int idx : rows[r]) {
        if (idx >= 0) dw.row(idx) += g.row(static_cast<long>(r));
      }
    }
    t.accumulate(iw, dw);
  });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const long rows = parts[0].rows();
  long cols = 0;
  for (const auto& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + shape(parts[0].value()) + " vs " + shape(p.value()));
    }
    cols += p.cols();
  }
  Mat<T> out(rows, cols);
  std::vector<int> ids;
  std::vector<long> offsets;
  long at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(at);
    at += p.cols();
  }
  return parts[0].tape->push(std::move(out), parts, [ids, offsets](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    for (size_t i = 0; i < ids.size(); ++i) {
      t.accumulate(ids[i], g.middleCols(offsets[i], t.value(ids[i]).cols()));
    }
  });
}

template <class T>
Var<T> slice_cols(Var<T> a, long begin, long count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                     ") outside " + shape(a.value()));
  }
  const int ia = a.id;
  return a.tape->push(a.value().middleCols(begin, count), {a}, [ia, begin, count](Tape<T>& t, int self) {
    Mat<T> d = Mat<T>::Zero(t.value(ia).rows(), t.value(ia).cols());
    d.middleCols(begin, count) = t.grad(self);
    t.accumulate(ia, d);
  });
}

template <class T>
Var<T> gather_rows(Var<T> a, const std::vector<int>& index) {
  const Mat<T>& A = a.value();
  Mat<T> out(static_cast<long>(index.size()), A.cols());
  for (size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= A.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside " + shape(A));
    }
    out.row(static_cast<long>(i)) = A.row(index[i]);
  }
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia, index](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    Mat<T> d = Mat<T>::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (size_t i = 0; i < index.size(); ++i) d.row(index[i]) += g.row(static_cast<long>(i));
    t.accumulate(ia, d);
  });
}

template <class T>
Var<T> segment_softmax(Var<T> a, int k) {
  const Mat<T>& A = a.value();
  if (k <= 0 || A.rows() % k != 0) {
    throw ShapeError("segment_softmax: " + shape(A) + " rows not divisible by " + std::to_string(k));
  }
  Mat<T> p(A.rows(), A.cols());
  for (long s = 0; s < A.rows(); s += k) {
    const auto block = A.middleRows(s, k);
    const auto mx = block.colwise().maxCoeff();
    Mat<T> e = (block.rowwise() - mx).array().exp();
    const auto sum = e.colwise().sum();
    p.middleRows(s, k) = e.array().rowwise() / sum.array();
  }
  const int ia = a.id;
  return a.tape->push(std::move(p), {a}, [ia, k](Tape<T>& t, int self) {
    const Mat<T>& P = t.value(self);
    const Mat<T>& g = t.grad(self);
    Mat<T> d(P.rows(), P.cols());
    for (long s = 0; s < P.rows(); s += k) {
      const auto pb = P.middleRows(s, k);
      const auto gb = g.middleRows(s, k);
      const auto dot = gb.cwiseProduct(pb).colwise().sum();
      d.middleRows(s, k) = pb.array() * (gb.rowwise() - dot).array();
    }
    t.accumulate(ia, d);
  });
}

template <class T>
Var<T> segment_sum(Var<T> a, int k) {
  const Mat<T>& A = a.value();
  if (k <= 0 || A.rows() % k != 0) {
    throw ShapeError("segment_sum: " + shape(A) + " rows not divisible by " + std::to_string(k));
  }
  Mat<T> out = Mat<T>::Zero(A.rows() / k, A.cols());
  for (long r = 0; r < A.rows(); ++r) out.row(r / k) += A.row(r);
  const int ia = a.id;
  return a.tape->push(std::move(out), {a}, [ia, k](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    Mat<T> d(g.rows() * k, g.cols());
    for (long r = 0; r < d.rows(); ++r) d.row(r) = g.row(r / k);
    t.accumulate(ia, d);
  });
}

template <class T>
Var<T> select_rows(Var<T> a, Var<T> b, const std::vector<bool>& take_a) {
  same_tape(a, b, "select_rows");
  same_shape(a.value(), b.value(), "select_rows");
  if (static_cast<long>(take_a.size()) != a.rows()) {
    throw ShapeError("select_rows: " + std::to_string(take_a.size()) + " selectors for " + shape(a.value()));
  }
  Mat<T> out = b.value();
  for (long r = 0; r < out.rows(); ++r) {
    if (take_a[r]) out.row(r) = a.value().row(r);
  }
  const int ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {a, b}, [ia, ib, take_a](Tape<T>& t, int self) {
    const Mat<T>& g = t.grad(self);
    Mat<T> da = g, db = g;
    for (long r = 0; r < g.rows(); ++r) (take_a[r] ? db : da).row(r).setZero();
    t.accumulate(ia, da);
    t.accumulate(ib, db);
  });
}

template <class T>
Mat<T> log_softmax_rows(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (long r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

template <class T>
Var<T> cross_entropy_from_logits(Var<T> logits, const std::vector<int>& target, const std::vector<T>& weight) {
  const Mat<T>& L = logits.value();
  if (static_cast<long>(target.size()) != L.rows() || weight.size() != target.size()) {
    throw ShapeError("cross_entropy_from_logits: " + std::to_string(target.size()) + " targets and " +
                     std::to_string(weight.size()) + " weights for logits " + shape(L));
  }
  const Mat<T> logp = log_softmax_rows(L);
  T loss = 0;
  for (long r = 0; r < L.rows(); ++r) {
    if (weight[r] == T(0)) continue;
    if (target[r] < 0 || target[r] >= L.cols()) {
      throw ShapeError("cross_entropy_from_logits: target " + std::to_string(target[r]) + " outside " + shape(L));
    }
    loss -= weight[r] * logp(r, target[r]);
  }
  Mat<T> out(1, 1);
  out(0, 0) = loss;
  const int il = logits.id;
  return logits.tape->push(std::move(out), {logits}, [il, target, weight, logp](Tape<T>& t, int self) {
    const T g = t.grad(self)(0, 0);
    Mat<T> d = Mat<T>::Zero(logp.rows(), logp.cols());
    for (long r = 0; r < logp.rows(); ++r) {
      if (weight[r] == T(0)) continue;
      d.row(r) = logp.row(r).array().exp() * (g * weight[r]);
      d(r, target[r]) -= g * weight[r];
    }
    t.accumulate(il, d);
  });
}

#define CADSIG_INSTANTIATE(T)                                                                       \
  template class Tape<T>;                                                                           \
  template Var<T> matmul(Var<T>, Var<T>, bool);                                                     \
  template Var<T> add(Var<T>, Var<T>);                                                              \
  template Var<T> sub(Var<T>, Var<T>);                                                              \
  template Var<T> add_row(Var<T>, Var<T>);                                                          \
  template Var<T> mul(Var<T>, Var<T>);                                                              \
  template Var<T> scale(Var<T>, T);                                                                 \
  template Var<T> relu(Var<T>);                                                                     \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                            \
  template Var<T> softmax_with_additive_mask(Var<T>, const Mat<T>&);                                \
  template Var<T> softmax(Var<T>);                                                                  \
  template Var<T> dropout(Var<T>, T, std::mt19937_64&);                                             \
  template Var<T> embedding_projection(Var<T>, const std::vector<std::array<int, 2>>&);             \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                          \
  template Var<T> slice_cols(Var<T>, long, long);                                                   \
  template Var<T> gather_rows(Var<T>, const std::vector<int>&);                                     \
  template Var<T> segment_softmax(Var<T>, int);                                                     \
  template Var<T> segment_sum(Var<T>, int);                                                         \
  template Var<T> select_rows(Var<T>, Var<T>, const std::vector<bool>&);                            \
  template Var<T> cross_entropy_from_logits(Var<T>, const std::vector<int>&, const std::vector<T>&); \
  template Mat<T> log_softmax_rows(const Mat<T>&);

CADSIG_INSTANTIATE(float)
CADSIG_INSTANTIATE(double)

}  // namespace cadsig::num
