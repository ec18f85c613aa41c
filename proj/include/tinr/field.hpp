#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <utility>
#include <vector>

#include "tinr/data.hpp"
#include "tinr/error.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

/// Anything that maps a batch of normalized (x, t) coordinates [M x 2] to
/// field values [M x 1]: the continuous representation Phi(x, t).
template <class F>
concept CoordinateField = requires(const F& f, const Tensor& coords) {
  { f.evaluate(coords) } -> std::convertible_to<Tensor>;
};

/// Physical-to-model mapping captured at training time.
struct FieldDomain {
  AxisNormalization x;
  AxisNormalization t;
  ValueScale value;

  static FieldDomain of(const GridField& field, ValueScale value = {}) {
    return {field.x_normalization(), field.t_normalization(), value};
  }
  bool operator==(const FieldDomain&) const = default;
};

struct QueryResult {
  GridField field;
  std::size_t out_of_domain = 0;  // queried points outside [-1, 1]^2 (extrapolated)
};

/// Dense evaluation of `model` on the Cartesian product of the physical axes,
/// at any resolution. Coordinates are normalized with the training domain;
/// points outside it are evaluated but counted in `out_of_domain`. Rows are
/// processed in axis order in batches of `batch` points.
template <CoordinateField F>
QueryResult query_grid(const F& model, std::vector<double> xs, std::vector<double> ts, const FieldDomain& domain,
                       std::size_t batch = 4096) {
  if (xs.empty() || ts.empty()) throw ContractError("query_grid: axes must be nonempty");
  if (batch == 0) batch = 1;
  const std::size_t S = xs.size();
  const std::size_t T = ts.size();
  const std::size_t total = S * T;
  constexpr double kSlack = 1e-12;
  auto outside = [](double u) { return u < -1.0 - kSlack || u > 1.0 + kSlack; };

  std::size_t out_of_domain = 0;
  Tensor values(Shape{S, T});
  for (std::size_t start = 0; start < total; start += batch) {
    const std::size_t n = std::min(batch, total - start);
    Tensor coords(Shape{n, 2});
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t cell = start + k;
      const double u = domain.x.normalize(xs[cell / T]);
      const double w = domain.t.normalize(ts[cell % T]);
      out_of_domain += outside(u) || outside(w);
      coords.at(k, 0) = u;
      coords.at(k, 1) = w;
    }
    const Tensor out = model.evaluate(coords);
    if (out.rows() != n || out.cols() != 1) throw DimensionError("query_grid: model must return one value per point");
    for (std::size_t k = 0; k < n; ++k) values[start + k] = domain.value.denormalize(out[k]);
  }
  return {GridField(std::move(values), std::move(xs), std::move(ts)), out_of_domain};
}

/// Axes with `n` evenly spaced samples spanning the training domain.
inline std::vector<double> domain_axis(const AxisNormalization& axis, std::size_t n) {
  return linspace(axis.min, axis.max, n);
}

}  // namespace tinr
