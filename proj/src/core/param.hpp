#pragma once

#include "core/tensor.hpp"

namespace lc {

// Named trainable tensor plus its Adam moment buffers.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> adam_m, adam_v;

  Param() = default;
  Param(std::string nm, Tensor<T> t) : name(std::move(nm)), tensor(std::move(t)) {
    tensor.set_requires_grad(true);
    adam_m.assign(static_cast<size_t>(tensor.numel()), T(0));
    adam_v.assign(static_cast<size_t>(tensor.numel()), T(0));
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update, in place. t is the 1-based step index.
// Throws ErrCode::numeric naming the parameter if its gradient is non-finite.
template <typename T>
void adam_step(std::vector<Param<T>>& params, const AdamConfig& cfg, int64_t t) {
  if (t < 1) fail(ErrCode::invalid_argument, "adam_step: t must be >= 1");
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : params) {
    const auto& g = p.tensor.grad();
    if (g.size() != p.tensor.value().size())
      fail(ErrCode::state, "adam_step: no gradient for parameter " + p.name);
    if (!all_finite(g)) fail(ErrCode::numeric, "adam_step: non-finite gradient in parameter " + p.name);
    auto& w = p.tensor.mutable_value();
    for (size_t i = 0; i < w.size(); ++i) {
      double gi = g[i];
      double m = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * gi;
      double v = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * gi * gi;
      p.adam_m[i] = static_cast<T>(m);
      p.adam_v[i] = static_cast<T>(v);
      double mhat = m / bc1;
      double vhat = v / bc2;
      w[i] = static_cast<T>(w[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template <typename T>
void zero_grads(std::vector<Param<T>>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace lc
