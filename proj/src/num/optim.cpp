#include "cadsig/num/optim.hpp"

#include <cmath>

namespace cadsig::num {

template <class T>
AdamW<T>::AdamW(std::vector<Parameter<T>*> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
  if (!(cfg.lr > 0)) throw DomainError("AdamW: learning rate must be positive");
  for (auto* p : params_) {
    m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
  }
}

template <class T>
void AdamW<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <class T>
std::string AdamW<T>::step() {
  for (auto* p : params_) {
    if (!p->grad.allFinite()) return "non-finite gradient in parameter '" + p->name + "'";
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
  const T step = static_cast<T>(lr_ / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg_.eps);
  const T decay = static_cast<T>(1.0 - lr_ * cfg_.weight_decay);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i]->value;
    const auto& g = params_[i]->grad;
    m_[i] = b1 * m_[i] + (T(1) - b1) * g;
    v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
    w *= decay;
    w.array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
  }
  return {};
}

template <class T>
double grad_norm(const std::vector<Parameter<T>*>& params) {
  double s = 0;
  for (auto* p : params) s += static_cast<double>(p->grad.squaredNorm());
  return std::sqrt(s);
}

template class AdamW<float>;
template class AdamW<double>;
template double grad_norm(const std::vector<Parameter<float>*>&);
template double grad_norm(const std::vector<Parameter<double>*>&);

}  // namespace cadsig::num
