#pragma once

#include "core/tensor.hpp"

namespace lc {

// Central-difference gradient check. fn maps the inputs to a scalar tensor;
// it is re-invoked for every probe, so it must be a pure function of the
// inputs. Returns max over all input entries of
//   |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Meant to run with T = double.
template <typename T>
double gradient_check(const std::function<Tensor<T>(std::vector<Tensor<T>>&)>& fn,
                      std::vector<Tensor<T>> inputs, double epsilon = 1e-4,
                      double floor_ = 1e-8) {
  for (auto& in : inputs) in.set_requires_grad(true);
  Tensor<T> out = fn(inputs);
  out.backward();

  std::vector<std::vector<T>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  double worst = 0.0;
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    auto& vals = inputs[ii].mutable_value();
    for (size_t j = 0; j < vals.size(); ++j) {
      T keep = vals[j];
      vals[j] = keep + static_cast<T>(epsilon);
      double fp = static_cast<double>(fn(inputs).item());
      vals[j] = keep - static_cast<T>(epsilon);
      double fm = static_cast<double>(fn(inputs).item());
      vals[j] = keep;
      double numeric = (fp - fm) / (2.0 * epsilon);
      double a = static_cast<double>(analytic[ii][j]);
      double denom = std::max({std::abs(a), std::abs(numeric), floor_});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

// nudges values away from activation kinks so central differences stay valid
template <typename T>
void nudge_from_kinks(Tensor<T>& t, const std::vector<T>& kinks, T margin = T(1e-2)) {
  for (auto& v : t.mutable_value())
    for (T k : kinks)
      if (std::abs(v - k) < margin) v = k + (v >= k ? margin : -margin);
}

}  // namespace lc
