#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tinr/data.hpp"
#include "tinr/error.hpp"
#include "tinr/random.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

/// Low-rank factorization Y ~ U V^T with U [S x r], V [T x r].
struct MfModel {
  Tensor u;
  Tensor v;
  std::size_t rank = 1;
  double lambda = 1e-3;

  Tensor reconstruct() const {
    Tensor out(Shape{u.rows(), v.rows()});
    out.matrix().noalias() = u.matrix() * v.matrix().transpose();
    return out;
  }

  template <class F>
  void for_each_param(F&& f) {
    f(std::string("mf.u"), u);
    f(std::string("mf.v"), v);
  }
  template <class F>
  void for_each_param(F&& f) const {
    f(std::string("mf.u"), u);
    f(std::string("mf.v"), v);
  }
};

struct MfConfig {
  std::size_t rank = 4;
  double lambda = 1e-3;
  std::size_t sweeps = 50;
  std::uint64_t seed = 0;
};

struct MfFit {
  MfModel model;
  std::vector<double> objective;  // after init, then after every sweep
  bool underdetermined = false;   // fewer observations than r (S + T)
};

namespace detail {

inline double mf_objective(const Tensor& y, const ObservationMask& mask, const Tensor& u, const Tensor& v,
                           double lambda) {
  const Tensor::RowMatrix rec = u.matrix() * v.matrix().transpose();
  double fit = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    for (std::size_t j = 0; j < y.cols(); ++j) {
      if (!mask.observed(i, j)) continue;
      const double e = y.at(i, j) - rec(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      fit += e * e;
    }
  }
  return fit + lambda * (u.matrix().squaredNorm() + v.matrix().squaredNorm());
}

// Solves every row of `target` given `other`: (O_J^T O_J + lambda I) x = O_J^T y_J
// over the observed entries J of that row. `transposed` walks mask columns.
inline void ridge_rows(Tensor& target, const Tensor& other, const Tensor& y, const ObservationMask& mask,
                       bool transposed, double lambda) {
  const std::size_t r = target.cols();
  const auto R = static_cast<Eigen::Index>(r);
  const std::size_t n_rows = target.rows();
  const std::size_t n_other = other.rows();
  for (std::size_t a = 0; a < n_rows; ++a) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(R, R) * lambda;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(R);
    for (std::size_t b = 0; b < n_other; ++b) {
      const bool seen = transposed ? mask.observed(b, a) : mask.observed(a, b);
      if (!seen) continue;
      const double yv = transposed ? y.at(b, a) : y.at(a, b);
      const auto row = other.matrix().row(static_cast<Eigen::Index>(b));
      gram.noalias() += row.transpose() * row;
      rhs.noalias() += yv * row.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    const double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 1e-12 * std::sqrt(scale)) {
      throw NumericalError("ALS normal equations are singular for " + std::string(transposed ? "column " : "row ") +
                           std::to_string(a) + "; increase the ridge weight lambda");
    }
    const Eigen::VectorXd x = llt.solve(rhs);
    for (std::size_t k = 0; k < r; ++k) target.at(a, k) = x(static_cast<Eigen::Index>(k));
  }
}

}  // namespace detail

/// Alternating ridge least squares on the observed cells only. Each sweep
/// solves U given V, then V given U; the objective
///   sum_observed (y - U V^T)^2 + lambda (|U|^2 + |V|^2)
/// is checked to be non-increasing after every sweep.
inline MfFit fit_mf(const GridField& field, const ObservationMask& mask, const MfConfig& cfg) {
  mask.check_matches(field);
  const std::size_t S = field.space_size();
  const std::size_t T = field.time_size();
  if (cfg.rank == 0 || cfg.rank > std::min(S, T)) {
    throw ConfigError("MF rank must lie in [1, min(S, T)] = [1, " + std::to_string(std::min(S, T)) + "]");
  }
  if (!(cfg.lambda >= 0.0)) throw ConfigError("MF ridge weight must be non-negative");

  MfFit out;
  out.underdetermined = mask.observed_count() < cfg.rank * (S + T);
  MfModel& m = out.model;
  m.rank = cfg.rank;
  m.lambda = cfg.lambda;
  Rng rng(cfg.seed);
  // Entries ~ N(0, 1/sqrt(r)) as a variance.
  const double stddev = std::pow(static_cast<double>(cfg.rank), -0.25);
  m.u = Tensor(Shape{S, cfg.rank});
  m.v = Tensor(Shape{T, cfg.rank});
  for (double& x : m.u.storage()) x = stddev * rng.normal();
  for (double& x : m.v.storage()) x = stddev * rng.normal();

  const Tensor& y = field.values();
  out.objective.push_back(detail::mf_objective(y, mask, m.u, m.v, cfg.lambda));
  for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
    detail::ridge_rows(m.u, m.v, y, mask, false, cfg.lambda);
    detail::ridge_rows(m.v, m.u, y, mask, true, cfg.lambda);
    const double obj = detail::mf_objective(y, mask, m.u, m.v, cfg.lambda);
    const double prev = out.objective.back();
    if (obj > prev + 1e-10 * std::max(1.0, std::abs(prev))) {
      throw NumericalError("ALS objective increased at sweep " + std::to_string(sweep) + ": " + format_double(prev) +
                           " -> " + format_double(obj));
    }
    out.objective.push_back(obj);
  }
  return out;
}

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  double relative_l2 = 0.0;
};

/// Errors of `prediction` against `truth` over the cells selected by `scope`.
/// relative_l2 is |pred - truth|_2 / |truth|_2 (infinite when truth is zero
/// on the scope and the error is not).
inline Metrics metrics(const Tensor& prediction, const Tensor& truth, const ObservationMask& scope) {
  if (prediction.shape() != truth.shape() || truth.rows() != scope.rows() || truth.cols() != scope.cols()) {
    throw DimensionError("metrics: prediction " + shape_string(prediction.shape()) + ", truth " +
                         shape_string(truth.shape()) + " and scope must share a shape");
  }
  double sq = 0.0;
  double abs = 0.0;
  double norm = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t j = 0; j < truth.cols(); ++j) {
      if (!scope.observed(i, j)) continue;
      const double e = prediction.at(i, j) - truth.at(i, j);
      sq += e * e;
      abs += std::abs(e);
      norm += truth.at(i, j) * truth.at(i, j);
      ++n;
    }
  }
  if (n == 0) throw ContractError("metrics: empty evaluation scope");
  Metrics m;
  m.rmse = std::sqrt(sq / static_cast<double>(n));
  m.mae = abs / static_cast<double>(n);
  m.relative_l2 = norm > 0.0 ? std::sqrt(sq) / std::sqrt(norm) : (sq > 0.0 ? INFINITY : 0.0);
  return m;
}

inline Metrics metrics(const GridField& prediction, const GridField& truth, const ObservationMask& scope) {
  return metrics(prediction.values(), truth.values(), scope);
}

/// `metric,value` CSV.
inline std::string metrics_csv(const Metrics& m) {
  return "metric,value\nrmse," + format_double(m.rmse) + "\nmae," + format_double(m.mae) + "\nrelative_l2," +
         format_double(m.relative_l2) + "\n";
}

}  // namespace tinr
