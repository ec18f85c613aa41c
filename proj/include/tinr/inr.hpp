#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tinr/autodiff.hpp"
#include "tinr/encoding.hpp"
#include "tinr/error.hpp"
#include "tinr/random.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

enum class Activation { kRelu, kSine, kIdentity };

inline std::string_view activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSine: return "sine";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sine") return Activation::kSine;
  if (s == "identity") return Activation::kIdentity;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

/// weight: [fan_in x fan_out], bias: [fan_out]. A layer maps h -> act(h W + b);
/// sine layers compute sin(omega0 * h W + b).
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::kIdentity;

  std::size_t fan_in() const noexcept { return weight.rows(); }
  std::size_t fan_out() const noexcept { return weight.cols(); }
};

/// Frequency-enhanced MLP parameters: a ReLU layer on the lifted input, sine
/// layers with frequency factor omega0, and a final affine read-out.
struct InrParams {
  std::vector<DenseLayer> layers;
  double omega0 = 30.0;

  std::size_t input_dim() const { return layers.front().fan_in(); }
  std::size_t output_dim() const { return layers.back().fan_out(); }

  std::size_t sine_layer_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.activation == Activation::kSine;
    return n;
  }

  void validate() const {
    if (layers.size() < 2) throw ContractError("INR needs at least 2 layers");
    if (!(omega0 > 0.0)) throw ContractError("omega0 must be positive");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const DenseLayer& layer = layers[l];
      if (layer.weight.rank() != 2 || layer.bias.shape() != Shape{layer.fan_out()}) {
        throw DimensionError("layer " + std::to_string(l) + ": weight " + shape_string(layer.weight.shape()) +
                             " and bias " + shape_string(layer.bias.shape()) + " are inconsistent");
      }
      if (l > 0 && layers[l - 1].fan_out() != layer.fan_in()) {
        throw DimensionError("layer " + std::to_string(l) + " expects width " + std::to_string(layer.fan_in()) +
                             " but layer " + std::to_string(l - 1) + " produces " +
                             std::to_string(layers[l - 1].fan_out()));
      }
    }
  }

  template <class F>
  void for_each_param(std::string_view prefix, F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      f(std::string(prefix) + "layer" + std::to_string(l) + ".weight", layers[l].weight);
      f(std::string(prefix) + "layer" + std::to_string(l) + ".bias", layers[l].bias);
    }
  }
  template <class F>
  void for_each_param(std::string_view prefix, F&& f) const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      f(std::string(prefix) + "layer" + std::to_string(l) + ".weight", layers[l].weight);
      f(std::string(prefix) + "layer" + std::to_string(l) + ".bias", layers[l].bias);
    }
  }
};

namespace detail {

inline void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 3) throw ContractError("INR needs at least 2 layers (3 widths)");
  for (std::size_t w : widths) {
    if (w == 0) throw ContractError("INR layer widths must be positive");
  }
}

inline Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace detail

/// Initializes the default schedule (ReLU, sine..., affine). widths lists
/// input width, hidden widths and output width. Layer 0 weights are
/// U(-1/fan_in, 1/fan_in); all later layers U(-sqrt(6/fan_in)/omega0, +...).
/// Biases start at zero.
inline InrParams init_inr(const std::vector<std::size_t>& widths, double omega0, std::uint64_t seed) {
  detail::check_widths(widths);
  if (!(omega0 > 0.0)) throw ContractError("omega0 must be positive");
  Rng rng(seed);
  InrParams p;
  p.omega0 = omega0;
  const std::size_t n_layers = widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t fan_in = widths[l];
    const double bound = l == 0 ? 1.0 / static_cast<double>(fan_in)
                                : std::sqrt(6.0 / static_cast<double>(fan_in)) / omega0;
    DenseLayer layer;
    layer.weight = detail::uniform_tensor(Shape{fan_in, widths[l + 1]}, bound, rng);
    layer.bias = Tensor(Shape{widths[l + 1]});
    layer.activation = l == 0 ? Activation::kRelu : (l + 1 == n_layers ? Activation::kIdentity : Activation::kSine);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Plain ReLU MLP (no sine layers), U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
/// weights and biases. Used as the spectral-bias reference model.
inline InrParams init_relu_mlp(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  detail::check_widths(widths);
  Rng rng(seed);
  InrParams p;
  const std::size_t n_layers = widths.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    DenseLayer layer;
    layer.weight = detail::uniform_tensor(Shape{widths[l], widths[l + 1]}, bound, rng);
    layer.bias = detail::uniform_tensor(Shape{widths[l + 1]}, bound, rng);
    layer.activation = l + 1 == n_layers ? Activation::kIdentity : Activation::kRelu;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Graph leaves for a parameter set, in for_each_param order (W0, b0, W1, ...).
inline std::vector<Var> bind_params(Graph& g, const InrParams& params, bool trainable) {
  std::vector<Var> vars;
  vars.reserve(2 * params.layers.size());
  for (const DenseLayer& layer : params.layers) {
    vars.push_back(trainable ? g.variable(layer.weight) : g.constant(layer.weight));
    vars.push_back(trainable ? g.variable(layer.bias) : g.constant(layer.bias));
  }
  return vars;
}

/// Runs the layer stack on an already-lifted input. `shifts`, when given,
/// holds one row-shift per sine layer, added inside the sine:
///   sin(omega0 * h W + b + s).
inline Var forward_layers(const InrParams& params, std::span<const Var> vars, const Var& input,
                          std::span<const Var> shifts = {}) {
  if (vars.size() != 2 * params.layers.size()) throw ContractError("parameter binding does not match network");
  if (!shifts.empty() && shifts.size() != params.sine_layer_count()) {
    throw DimensionError("expected " + std::to_string(params.sine_layer_count()) + " modulation shifts, got " +
                         std::to_string(shifts.size()));
  }
  if (input.value().rank() != 2 || input.value().cols() != params.input_dim()) {
    throw DimensionError("network input " + shape_string(input.shape()) + " does not have " +
                         std::to_string(params.input_dim()) + " columns");
  }
  Var h = input;
  std::size_t sine_index = 0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Var& w = vars[2 * l];
    const Var& b = vars[2 * l + 1];
    switch (params.layers[l].activation) {
      case Activation::kRelu:
        h = relu(add_row(matmul(h, w), b));
        break;
      case Activation::kIdentity:
        h = add_row(matmul(h, w), b);
        break;
      case Activation::kSine: {
        Var pre = add_row(scale(matmul(h, w), params.omega0), b);
        if (!shifts.empty()) pre = add_row(pre, shifts[sine_index]);
        ++sine_index;
        h = sin(pre);
        break;
      }
    }
  }
  return h;
}

/// A coordinate network together with its input lift. Without a Fourier
/// bank the raw coordinates feed the first layer.
struct InrModel {
  std::optional<FourierFeatureBank> bank;
  InrParams net;

  using Prepared = Tensor;

  std::size_t coord_dim() const { return bank ? bank->input_dim() : net.input_dim(); }

  Tensor lift(const Tensor& coords) const {
    if (coords.rank() != 2 || coords.cols() != coord_dim()) {
      throw DimensionError("coordinates " + shape_string(coords.shape()) + " do not have " +
                           std::to_string(coord_dim()) + " columns");
    }
    return bank ? encode(*bank, coords) : coords;
  }

  void validate() const {
    net.validate();
    if (bank && bank->output_dim() != net.input_dim()) {
      throw DimensionError("encoder width " + std::to_string(bank->output_dim()) + " does not match first layer width " +
                           std::to_string(net.input_dim()));
    }
  }

  Prepared prepare(const Tensor& coords) const { return lift(coords); }

  Var forward(Graph& g, const Prepared& lifted, std::vector<Var>& params_out, bool trainable = true) const {
    params_out = bind_params(g, net, trainable);
    return forward_layers(net, params_out, g.constant(lifted));
  }

  /// Pure evaluation on a coordinate batch; returns [M x d_out].
  Tensor evaluate(const Tensor& coords) const {
    Graph g;
    std::vector<Var> vars;
    return forward(g, prepare(coords), vars, false).value();
  }

  template <class F>
  void for_each_param(F&& f) {
    net.for_each_param("", f);
  }
  template <class F>
  void for_each_param(F&& f) const {
    net.for_each_param("", f);
  }
};

/// Convenience: lift with `bank`, then run `params`. Differentiable in the
/// parameters through `vars` (see bind_params).
inline Var forward(Graph& g, const InrParams& params, const FourierFeatureBank& bank, const Tensor& coords,
                   std::vector<Var>& vars) {
  InrModel view{bank, params};
  view.validate();
  return view.forward(g, view.prepare(coords), vars);
}

// ---------------------------------------------------------------------------
// Factorized model: Phi(v) = Phi_x(v_x) M_xt Phi_t(v_t)^T

struct FactorizedInrParams {
  InrParams spatial;   // output width d_x
  InrParams temporal;  // output width d_t
  Tensor middle;       // M_xt, [d_x x d_t]
  bool train_middle = true;  // false fixes M_xt (identity gives the bare product form)
};

struct FactorizedModel {
  FourierFeatureBank spatial_bank;   // c_in = 1
  FourierFeatureBank temporal_bank;  // c_in = 1
  FactorizedInrParams params;

  struct Prepared {
    Tensor spatial;
    Tensor temporal;
  };

  void validate() const {
    InrModel{spatial_bank, params.spatial}.validate();
    InrModel{temporal_bank, params.temporal}.validate();
    if (spatial_bank.input_dim() != 1 || temporal_bank.input_dim() != 1) {
      throw DimensionError("factorized banks must take one coordinate each");
    }
    if (params.middle.shape() != Shape{params.spatial.output_dim(), params.temporal.output_dim()}) {
      throw DimensionError("middle transform " + shape_string(params.middle.shape()) + " does not match widths " +
                           std::to_string(params.spatial.output_dim()) + " and " +
                           std::to_string(params.temporal.output_dim()));
    }
  }

  static Tensor column(const Tensor& coords, std::size_t c) {
    Tensor out(Shape{coords.rows(), 1});
    for (std::size_t r = 0; r < coords.rows(); ++r) out[r] = coords.at(r, c);
    return out;
  }

  Prepared prepare(const Tensor& coords) const {
    if (coords.rank() != 2 || coords.cols() != 2) {
      throw DimensionError("factorized model needs (x, t) coordinate pairs, got " + shape_string(coords.shape()));
    }
    return {encode(spatial_bank, column(coords, 0)), encode(temporal_bank, column(coords, 1))};
  }

  /// Row-wise bilinear form U_i M V_i^T -> [M x 1]. Parameter order: spatial
  /// layers, temporal layers, then M_xt (when trainable).
  Var forward(Graph& g, const Prepared& lifted, std::vector<Var>& params_out, bool trainable = true) const {
    auto spatial_vars = bind_params(g, params.spatial, trainable);
    auto temporal_vars = bind_params(g, params.temporal, trainable);
    const Var middle = trainable && params.train_middle ? g.variable(params.middle) : g.constant(params.middle);
    params_out = spatial_vars;
    params_out.insert(params_out.end(), temporal_vars.begin(), temporal_vars.end());
    if (params.train_middle) params_out.push_back(middle);
    const Var u = forward_layers(params.spatial, spatial_vars, g.constant(lifted.spatial));
    const Var v = forward_layers(params.temporal, temporal_vars, g.constant(lifted.temporal));
    return row_sum(mul(matmul(u, middle), v));
  }

  Tensor evaluate(const Tensor& coords) const {
    Graph g;
    std::vector<Var> vars;
    return forward(g, prepare(coords), vars, false).value();
  }

  /// Matrix form on a grid: U M V^T with U from the x samples and V from the
  /// t samples (both normalized). Returns [S x T].
  Tensor evaluate_grid(std::span<const double> xs, std::span<const double> ts) const {
    Tensor xcol(Shape{xs.size(), 1}, std::vector<double>(xs.begin(), xs.end()));
    Tensor tcol(Shape{ts.size(), 1}, std::vector<double>(ts.begin(), ts.end()));
    const Tensor u = InrModel{spatial_bank, params.spatial}.evaluate(xcol);
    const Tensor v = InrModel{temporal_bank, params.temporal}.evaluate(tcol);
    Tensor out(Shape{xs.size(), ts.size()});
    out.matrix().noalias() = u.matrix() * params.middle.matrix() * v.matrix().transpose();
    return out;
  }

  template <class F>
  void for_each_param(F&& f) {
    params.spatial.for_each_param("spatial.", f);
    params.temporal.for_each_param("temporal.", f);
    if (params.train_middle) f(std::string("middle"), params.middle);
  }
  template <class F>
  void for_each_param(F&& f) const {
    params.spatial.for_each_param("spatial.", f);
    params.temporal.for_each_param("temporal.", f);
    if (params.train_middle) f(std::string("middle"), params.middle);
  }
};

/// Spatial/temporal nets of the given widths (each ending in its rank width),
/// M_xt initialized to the rectangular identity.
inline FactorizedModel init_factorized(const std::vector<std::size_t>& hidden, std::size_t d_x, std::size_t d_t,
                                       double omega0, std::size_t bank_width, const std::vector<double>& scales,
                                       bool train_middle, std::uint64_t spatial_bank_seed,
                                       std::uint64_t temporal_bank_seed, std::uint64_t init_seed) {
  if (!train_middle && d_x != d_t) throw ContractError("a fixed identity middle transform needs d_x == d_t");
  auto spatial_bank = sample_bank(1, bank_width, scales, spatial_bank_seed);
  auto temporal_bank = sample_bank(1, bank_width, scales, temporal_bank_seed);
  std::vector<std::size_t> ws{spatial_bank.output_dim()};
  ws.insert(ws.end(), hidden.begin(), hidden.end());
  std::vector<std::size_t> wt = ws;
  ws.push_back(d_x);
  wt.push_back(d_t);
  FactorizedInrParams p;
  p.spatial = init_inr(ws, omega0, derive_seed(init_seed, SeedStream::kInit, 1));
  p.temporal = init_inr(wt, omega0, derive_seed(init_seed, SeedStream::kInit, 2));
  p.middle = Tensor(Shape{d_x, d_t});
  for (std::size_t k = 0; k < std::min(d_x, d_t); ++k) p.middle.at(k, k) = 1.0;
  p.train_middle = train_middle;
  FactorizedModel m{std::move(spatial_bank), std::move(temporal_bank), std::move(p)};
  m.validate();
  return m;
}

}  // namespace tinr
