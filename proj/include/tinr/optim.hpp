#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tinr/error.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

namespace detail {

inline void check_param_grad_pair(const Tensor& p, const Tensor& g) {
  if (p.shape() != g.shape()) {
    throw DimensionError("optimizer: parameter " + shape_string(p.shape()) + " vs gradient " +
                         shape_string(g.shape()));
  }
}

}  // namespace detail

/// p <- p - lr * g
inline void sgd_step(Tensor& param, const Tensor& grad, double lr) {
  detail::check_param_grad_pair(param, grad);
  if (!(lr > 0.0)) throw ContractError("sgd_step: learning rate must be positive");
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter tensor, plus the
/// number of completed steps (used for bias correction).
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// Bias-corrected Adam update applied to each (param, grad) pair in order.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state,
                      const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: parameter and gradient counts differ");
  if (!(cfg.lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    detail::check_param_grad_pair(p, g);
    detail::check_param_grad_pair(p, state.m[k]);
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace tinr
