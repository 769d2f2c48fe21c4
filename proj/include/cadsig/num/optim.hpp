#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/num/tensor.hpp"

namespace cadsig::num {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double gamma = 0.999;  // learning-rate decay per epoch
};

/// Bias-corrected adaptive moments with decoupled weight decay, plus an
/// exponential learning-rate schedule stepped at epoch boundaries.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<Parameter<T>*> params, AdamWConfig cfg);

  /// Applies one update from the accumulated gradients. Returns an empty string
  /// on success; otherwise the step is rejected and the diagnostic names the
  /// first parameter with a non-finite gradient.
  std::string step();
  void zero_grad();
  void epoch_end() { lr_ *= cfg_.gamma; }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  const AdamWConfig& config() const { return cfg_; }
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamWConfig cfg_;
  double lr_;
  long t_ = 0;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
};

/// Global L2 norm of all gradients.
template <class T>
double grad_norm(const std::vector<Parameter<T>*>& params);

}  // namespace cadsig::num
