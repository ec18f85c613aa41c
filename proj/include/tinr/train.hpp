#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tinr/autodiff.hpp"
#include "tinr/data.hpp"
#include "tinr/error.hpp"
#include "tinr/optim.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

/// A model trainable by full-batch gradient descent: it lifts coordinates once
/// (`prepare`), builds a differentiable forward pass, and enumerates its
/// parameters in the same order as the variables the forward pass binds.
template <class M>
concept TrainableModel = requires(M& m, const M& cm, Graph& g, const typename M::Prepared& prepared,
                                  std::vector<Var>& vars, const Tensor& coords) {
  { cm.prepare(coords) } -> std::same_as<typename M::Prepared>;
  { cm.forward(g, prepared, vars, true) } -> std::same_as<Var>;
  m.for_each_param([](const std::string&, Tensor&) {});
};

struct FitConfig {
  std::size_t steps = 2000;
  AdamConfig adam{};
};

/// losses[k] is the loss before update k; the last entry is the loss of the
/// returned parameters (so there are steps + 1 entries).
struct FitLog {
  std::vector<double> losses;
};

template <TrainableModel M>
std::vector<Tensor*> parameter_pointers(M& model) {
  std::vector<Tensor*> out;
  model.for_each_param([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

template <TrainableModel M>
double mse(const M& model, const typename M::Prepared& prepared, const Tensor& targets) {
  Graph g;
  std::vector<Var> vars;
  return mse_loss(model.forward(g, prepared, vars, false), targets).value().item();
}

template <TrainableModel M>
double mse(const M& model, const PairSet& pairs) {
  return mse(model, model.prepare(pairs.coords), pairs.targets);
}

/// Full-batch Adam on the pairs' MSE. `on_step(step, loss)` is called before
/// each update when provided.
template <TrainableModel M>
FitLog fit(M& model, const PairSet& pairs, const FitConfig& cfg, AdamState& state,
           const std::function<void(std::size_t, double)>& on_step = {}) {
  const auto prepared = model.prepare(pairs.coords);
  std::vector<Tensor*> params = parameter_pointers(model);
  FitLog log;
  log.losses.reserve(cfg.steps + 1);
  std::vector<const Tensor*> grads(params.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Graph g;
    std::vector<Var> vars;
    const Var loss = mse_loss(model.forward(g, prepared, vars, true), pairs.targets);
    if (vars.size() != params.size()) throw ContractError("model binds a different parameter count than it lists");
    g.backward(loss);
    const double value = loss.value().item();
    log.losses.push_back(value);
    if (on_step) on_step(step, value);
    for (std::size_t k = 0; k < vars.size(); ++k) grads[k] = &vars[k].grad();
    adam_step(params, grads, state, cfg.adam);
  }
  log.losses.push_back(mse(model, prepared, pairs.targets));
  return log;
}

}  // namespace tinr
