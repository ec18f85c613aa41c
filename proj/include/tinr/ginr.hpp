#pragma once

// Generalizable INR: one shared base network, conditioned per instance by a
// latent code phi through shift modulations of every sine layer,
//   h <- sin(omega0 * h W + b + s),   s = phi W_s + b_s,
// trained with first-order two-loop meta-learning. The inner loop fits phi by
// plain gradient descent with the network frozen (auto-decoding); the outer
// loop updates base and hypernetwork parameters with Adam, treating the
// adapted codes as constants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tinr/autodiff.hpp"
#include "tinr/data.hpp"
#include "tinr/encoding.hpp"
#include "tinr/error.hpp"
#include "tinr/inr.hpp"
#include "tinr/optim.hpp"
#include "tinr/parallel.hpp"
#include "tinr/random.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

struct LatentCode {
  Tensor phi;  // [d_latent]
  std::size_t instance_id = 0;
};

/// One affine map per sine layer: weight [d_latent x width], bias [width].
struct HypernetParams {
  struct Layer {
    Tensor weight;
    Tensor bias;
  };
  std::vector<Layer> layers;

  template <class F>
  void for_each_param(F&& f) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      f("hyper.layer" + std::to_string(k) + ".weight", layers[k].weight);
      f("hyper.layer" + std::to_string(k) + ".bias", layers[k].bias);
    }
  }
  template <class F>
  void for_each_param(F&& f) const {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      f("hyper.layer" + std::to_string(k) + ".weight", layers[k].weight);
      f("hyper.layer" + std::to_string(k) + ".bias", layers[k].bias);
    }
  }
};

struct MetaConfig {
  double inner_rate = 0.01;      // alpha
  std::size_t inner_steps = 3;   // K
  AdamConfig outer{};            // outer Adam (lr defaults to 1e-4)
  std::size_t batch_size = 4;    // instances per outer step
};

struct GinrState {
  FourierFeatureBank bank;
  InrParams base;         // theta
  HypernetParams hyper;   // omega
  std::size_t latent_dim = 64;
  std::map<std::size_t, LatentCode> codes;
  MetaConfig meta;
  AdamState outer_state;
  std::size_t outer_steps_done = 0;

  void validate() const {
    InrModel{bank, base}.validate();
    if (latent_dim == 0) throw ContractError("latent dimension must be positive");
    std::vector<std::size_t> sine_widths;
    for (const DenseLayer& l : base.layers) {
      if (l.activation == Activation::kSine) sine_widths.push_back(l.fan_out());
    }
    if (hyper.layers.size() != sine_widths.size()) {
      throw DimensionError("hypernetwork has " + std::to_string(hyper.layers.size()) + " layers for " +
                           std::to_string(sine_widths.size()) + " sine layers");
    }
    for (std::size_t k = 0; k < sine_widths.size(); ++k) {
      if (hyper.layers[k].weight.shape() != Shape{latent_dim, sine_widths[k]} ||
          hyper.layers[k].bias.shape() != Shape{sine_widths[k]}) {
        throw DimensionError("hypernetwork layer " + std::to_string(k) + " does not map " +
                             std::to_string(latent_dim) + " -> " + std::to_string(sine_widths[k]));
      }
    }
    for (const auto& [id, code] : codes) {
      if (code.phi.shape() != Shape{latent_dim}) {
        throw DimensionError("latent code of instance " + std::to_string(id) + " has shape " +
                             shape_string(code.phi.shape()));
      }
    }
  }

  LatentCode zero_code(std::size_t instance_id) const { return {Tensor(Shape{latent_dim}), instance_id}; }

  /// Outer parameters in optimizer order: base layers, then hypernetwork.
  template <class F>
  void for_each_param(F&& f) {
    base.for_each_param("base.", f);
    hyper.for_each_param(f);
  }
  template <class F>
  void for_each_param(F&& f) const {
    base.for_each_param("base.", f);
    hyper.for_each_param(f);
  }
};

/// Base network with the default schedule plus a hypernetwork layer per sine
/// layer. Hypernetwork weights are U(-1/sqrt(d_latent), +1/sqrt(d_latent)),
/// biases zero.
inline GinrState init_ginr(FourierFeatureBank bank, const std::vector<std::size_t>& hidden, std::size_t d_out,
                           double omega0, std::size_t latent_dim, const MetaConfig& meta, std::uint64_t init_seed,
                           std::uint64_t hyper_seed) {
  std::vector<std::size_t> widths{bank.output_dim()};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(d_out);
  GinrState s{std::move(bank), init_inr(widths, omega0, init_seed), {}, latent_dim, {}, meta, {}, 0};
  Rng rng(hyper_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (const DenseLayer& l : s.base.layers) {
    if (l.activation != Activation::kSine) continue;
    HypernetParams::Layer h;
    h.weight = detail::uniform_tensor(Shape{latent_dim, l.fan_out()}, bound, rng);
    h.bias = Tensor(Shape{l.fan_out()});
    s.hyper.layers.push_back(std::move(h));
  }
  s.validate();
  return s;
}

/// Graph bindings for one modulated evaluation.
struct GinrBinding {
  std::vector<Var> base;
  std::vector<Var> hyper;  // W_s0, b_s0, W_s1, ...
  Var phi;                 // [1 x d_latent]
};

inline GinrBinding bind_ginr(Graph& g, const GinrState& state, const Tensor& phi, bool train_network,
                             bool train_code) {
  if (phi.size() != state.latent_dim) {
    throw DimensionError("latent code of size " + std::to_string(phi.size()) + " given to a " +
                         std::to_string(state.latent_dim) + "-dimensional hypernetwork");
  }
  GinrBinding b;
  b.base = bind_params(g, state.base, train_network);
  for (const auto& layer : state.hyper.layers) {
    b.hyper.push_back(train_network ? g.variable(layer.weight) : g.constant(layer.weight));
    b.hyper.push_back(train_network ? g.variable(layer.bias) : g.constant(layer.bias));
  }
  Tensor row = phi.reshaped(Shape{1, state.latent_dim});
  b.phi = train_code ? g.variable(std::move(row)) : g.constant(std::move(row));
  return b;
}

/// Shift-modulated forward on a lifted input. Gradients reach theta, omega
/// and phi according to how `binding` was created.
inline Var modulated_forward(const GinrState& state, const GinrBinding& binding, const Var& lifted) {
  std::vector<Var> shifts;
  shifts.reserve(state.hyper.layers.size());
  for (std::size_t k = 0; k < state.hyper.layers.size(); ++k) {
    shifts.push_back(add_row(matmul(binding.phi, binding.hyper[2 * k]), binding.hyper[2 * k + 1]));
  }
  return forward_layers(state.base, binding.base, lifted, shifts);
}

/// Convenience overload: lifts `coords` with the state's bank.
inline Var modulated_forward(Graph& g, const GinrState& state, const LatentCode& code, const Tensor& coords,
                             GinrBinding& binding, bool train_network = true, bool train_code = true) {
  binding = bind_ginr(g, state, code.phi, train_network, train_code);
  return modulated_forward(state, binding, g.constant(encode(state.bank, coords)));
}

/// The shift s = phi W_s + b_s of every sine layer, evaluated directly.
inline std::vector<Tensor> modulation_shifts(const GinrState& state, const Tensor& phi) {
  std::vector<Tensor> out;
  for (const auto& layer : state.hyper.layers) {
    Tensor s(Shape{layer.bias.size()});
    for (std::size_t c = 0; c < s.size(); ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < state.latent_dim; ++k) acc += phi[k] * layer.weight.at(k, c);
      s[c] = acc + layer.bias[c];
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// The field of one instance: shared network plus its code. Satisfies
/// CoordinateField, so it can be handed to query_grid.
struct ModulatedField {
  const GinrState* state = nullptr;
  Tensor phi;

  Tensor evaluate(const Tensor& coords) const {
    Graph g;
    GinrBinding b = bind_ginr(g, *state, phi, false, false);
    return modulated_forward(*state, b, g.constant(encode(state->bank, coords))).value();
  }
};

/// Multi-instance loss: the mean over instances of each instance's MSE, i.e.
/// (1/NM) sum_n sum_i ||y_i^(n) - Phi(v_i^(n); phi^(n))||^2 for equal M. Codes
/// are looked up in `state.codes` by instance id. Builds a single graph.
inline Var ginr_loss(Graph& g, const GinrState& state, std::span<const PairSet> instances,
                     std::vector<GinrBinding>* bindings = nullptr) {
  if (instances.empty()) throw ContractError("ginr_loss: empty instance batch");
  std::vector<Var> losses;
  for (const PairSet& pairs : instances) {
    auto it = state.codes.find(pairs.instance_id);
    if (it == state.codes.end()) {
      throw ContractError("ginr_loss: no latent code for instance " + std::to_string(pairs.instance_id));
    }
    if (pairs.size() == 0) throw ContractError("ginr_loss: instance " + std::to_string(pairs.instance_id) + " has no pairs");
    GinrBinding b;
    const Var pred = modulated_forward(g, state, it->second, pairs.coords, b);
    losses.push_back(mse_loss(pred, pairs.targets));
    if (bindings) bindings->push_back(std::move(b));
  }
  Var total = losses.front();
  for (std::size_t k = 1; k < losses.size(); ++k) total = add(total, losses[k]);
  return losses.size() == 1 ? total : scale(total, 1.0 / static_cast<double>(losses.size()));
}

struct AdaptResult {
  LatentCode code;
  std::vector<double> loss_trace;  // loss before each step, then the final loss (K + 1 entries)
};

/// K steps of phi <- phi - rate * dL/dphi. `objective(phi, grad)` returns
/// L(phi) and, when `grad` is non-null, writes dL/dphi into it.
template <class Objective>
AdaptResult descend_code(const Tensor& code_init, std::size_t instance_id, double rate, std::size_t steps,
                         Objective&& objective) {
  if (!(rate > 0.0)) throw ContractError("inner_adapt: rate must be positive");
  AdaptResult out{{code_init, instance_id}, {}};
  out.loss_trace.reserve(steps + 1);
  Tensor& phi = out.code.phi;
  Tensor grad;
  auto fail = [&](std::size_t step, const std::string& why) {
    throw NumericalError("inner adaptation diverged at step " + std::to_string(step) + " (instance " +
                         std::to_string(instance_id) + ")" + why);
  };
  for (std::size_t step = 0; step <= steps; ++step) {
    double value = 0.0;
    try {
      value = objective(static_cast<const Tensor&>(phi), step < steps ? &grad : nullptr);
    } catch (const NumericalError& e) {
      fail(step, std::string(": ") + e.what());
    }
    if (!std::isfinite(value)) fail(step, "");
    out.loss_trace.push_back(value);
    if (step == steps) break;
    sgd_step(phi, grad, rate);
    if (!phi.all_finite()) fail(step, "");
  }
  return out;
}

namespace detail {

inline AdaptResult inner_adapt_lifted(const GinrState& state, const Tensor& lifted, const PairSet& pairs,
                                      const Tensor& code_init, double rate, std::size_t steps) {
  if (pairs.size() == 0) throw ContractError("inner_adapt: instance has no pairs");
  return descend_code(code_init, pairs.instance_id, rate, steps, [&](const Tensor& phi, Tensor* grad) {
    Graph g;
    GinrBinding b = bind_ginr(g, state, phi, false, grad != nullptr);
    const Var loss = mse_loss(modulated_forward(state, b, g.constant(lifted)), pairs.targets);
    if (grad) {
      g.backward(loss);
      *grad = b.phi.grad().reshaped(Shape{state.latent_dim});
    }
    return loss.value().item();
  });
}

}  // namespace detail

/// Auto-decoding: K steps of phi <- phi - alpha * dL/dphi with theta and
/// omega frozen (the state is taken by const reference).
inline AdaptResult inner_adapt(const GinrState& state, const PairSet& pairs, const Tensor& code_init, double rate,
                               std::size_t steps) {
  return detail::inner_adapt_lifted(state, encode(state.bank, pairs.coords), pairs, code_init, rate, steps);
}

struct MetaLog {
  std::vector<double> outer_losses;  // multi-instance loss with adapted codes, per outer step
};

/// One outer step over `batch` (indices into `instances`); returns the loss.
inline double meta_step(GinrState& state, std::span<const PairSet> instances, std::span<const Tensor> lifted,
                        std::span<const std::size_t> batch, std::size_t epoch) {
  const std::size_t n = batch.size();
  std::vector<std::vector<Tensor>> grads(n);
  std::vector<double> losses(n, 0.0);
  std::vector<Tensor> codes(n);

  parallel_for(n, [&](std::size_t b) {
    const PairSet& pairs = instances[batch[b]];
    const Tensor& in = lifted[batch[b]];
    try {
      // Episodic regime: every outer step re-adapts from the zero code.
      AdaptResult adapted = detail::inner_adapt_lifted(state, in, pairs, Tensor(Shape{state.latent_dim}),
                                                       state.meta.inner_rate, state.meta.inner_steps);
      codes[b] = adapted.code.phi;
      Graph g;
      GinrBinding binding = bind_ginr(g, state, codes[b], true, false);
      const Var loss = mse_loss(modulated_forward(state, binding, g.constant(in)), pairs.targets);
      g.backward(loss);
      losses[b] = loss.value().item();
      for (const Var& v : binding.base) grads[b].push_back(v.grad());
      for (const Var& v : binding.hyper) grads[b].push_back(v.grad());
    } catch (const NumericalError& e) {
      throw NumericalError("meta-fit aborted: epoch " + std::to_string(epoch) + ", outer step " +
                           std::to_string(state.outer_steps_done) + ", instance " +
                           std::to_string(pairs.instance_id) + ": " + e.what());
    }
  });

  // Deterministic reduction in batch order.
  std::vector<Tensor> mean = std::move(grads[0]);
  for (std::size_t b = 1; b < n; ++b) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      for (std::size_t i = 0; i < mean[k].size(); ++i) mean[k][i] += grads[b][k][i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t b = 0; b < n; ++b) loss += losses[b];
  loss *= inv;
  for (Tensor& t : mean) {
    for (double& v : t.storage()) v *= inv;
  }

  std::vector<Tensor*> params;
  state.for_each_param([&](const std::string&, Tensor& t) { params.push_back(&t); });
  std::vector<const Tensor*> grad_ptrs;
  for (const Tensor& t : mean) grad_ptrs.push_back(&t);
  adam_step(params, grad_ptrs, state.outer_state, state.meta.outer);
  ++state.outer_steps_done;

  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t id = instances[batch[b]].instance_id;
    state.codes[id] = LatentCode{std::move(codes[b]), id};
  }
  return loss;
}

/// Two-loop meta-learning. Each epoch walks the instances in order, in
/// batches of meta.batch_size; each batch is one outer step. `on_step(step,
/// loss)` observes progress.
inline MetaLog meta_fit(GinrState& state, std::span<const PairSet> instances, std::size_t epochs,
                        const std::function<void(std::size_t, double)>& on_step = {}) {
  state.validate();
  MetaLog log;
  if (epochs == 0) return log;
  if (instances.empty()) throw ContractError("meta_fit: need at least one instance");
  if (state.meta.batch_size == 0) throw ConfigError("meta_fit: batch size must be positive");
  if (!(state.meta.inner_rate > 0.0)) throw ConfigError("meta_fit: inner rate must be positive");
  std::vector<Tensor> lifted;
  lifted.reserve(instances.size());
  for (const PairSet& p : instances) lifted.push_back(encode(state.bank, p.coords));

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t start = 0; start < instances.size(); start += state.meta.batch_size) {
      std::vector<std::size_t> batch;
      for (std::size_t k = start; k < std::min(instances.size(), start + state.meta.batch_size); ++k) batch.push_back(k);
      const double loss = meta_step(state, instances, lifted, batch, epoch);
      log.outer_losses.push_back(loss);
      if (on_step) on_step(log.outer_losses.size() - 1, loss);
    }
  }
  return log;
}

struct AdaptReport {
  LatentCode code;
  double pre_loss = 0.0;   // loss at the zero code
  double post_loss = 0.0;  // loss after adaptation
  std::vector<double> loss_trace;
  bool adapted = false;    // false when K = 0

  ModulatedField field(const GinrState& state) const { return {&state, code.phi}; }
};

/// Test-time auto-decoding of an unseen instance from the zero code, with the
/// state's trained inner rate and step count (`steps` overrides K).
inline AdaptReport adapt_new(const GinrState& state, const PairSet& pairs, std::optional<std::size_t> steps = {}) {
  const std::size_t k = steps.value_or(state.meta.inner_steps);
  AdaptResult r = inner_adapt(state, pairs, Tensor(Shape{state.latent_dim}), state.meta.inner_rate, k);
  AdaptReport rep;
  rep.pre_loss = r.loss_trace.front();
  rep.post_loss = r.loss_trace.back();
  rep.loss_trace = std::move(r.loss_trace);
  rep.code = std::move(r.code);
  rep.adapted = k > 0;
  return rep;
}

}  // namespace tinr
