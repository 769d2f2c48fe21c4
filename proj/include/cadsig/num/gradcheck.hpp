#pragma once

// Central-difference gradient checking for scalar functions built on a Tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cadsig/num/tensor.hpp"

namespace cadsig::num {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int checked = 0;
};

/// Compares analytic gradients of f with respect to every input element against
/// (f(x+h) - f(x-h)) / 2h. The relative error of an element is
/// |a - n| / max(|a|, |n|); elements whose gradient magnitude is below `floor`
/// contribute through the absolute error only.
template <class T>
GradCheckResult gradcheck(const std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>& f,
                          std::vector<Mat<T>> inputs, T h = T(1e-5), double floor = 1e-7) {
  std::vector<Mat<T>> analytic;
  {
    Tape<T> tape;
    std::vector<Parameter<T>> params;
    params.reserve(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) params.emplace_back("x" + std::to_string(i), inputs[i]);
    std::vector<Var<T>> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    tape.backward(f(tape, vars));
    for (auto& p : params) analytic.push_back(p.grad);
  }
  auto eval = [&]() {
    Tape<T> tape(false);
    std::vector<Var<T>> vars;
    for (auto& x : inputs) vars.push_back(tape.constant(x));
    return static_cast<double>(f(tape, vars).value()(0, 0));
  };
  GradCheckResult r;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (long k = 0; k < inputs[i].size(); ++k) {
      T& x = inputs[i].data()[k];
      const T saved = x;
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[i].data()[k]);
      const double abs_err = std::abs(a - numeric);
      const double mag = std::max(std::abs(a), std::abs(numeric));
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      if (mag > floor) r.max_rel_error = std::max(r.max_rel_error, abs_err / mag);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace cadsig::num
