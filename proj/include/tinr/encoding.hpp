#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "tinr/error.hpp"
#include "tinr/random.hpp"
#include "tinr/tensor.hpp"

namespace tinr {

/// Concatenated random Fourier features.
///
/// Holds N_f frequency matrices B_k of shape (d/2) x c_in, with the entries of
/// B_k drawn from N(0, sigma_k^2). The lift of a coordinate v is
///
///   gamma(v) = [sin(2 pi B_1 v), cos(2 pi B_1 v), ..., sin(2 pi B_Nf v), cos(2 pi B_Nf v)]
///
/// with total width d * N_f. The bank is frozen once sampled.
class FourierFeatureBank {
 public:
  /// Rebuilds a bank from stored matrices (checkpoint load). Validates shapes.
  FourierFeatureBank(std::vector<Tensor> banks, std::vector<double> scales, std::size_t c_in, std::size_t d,
                     std::uint64_t seed)
      : banks_(std::move(banks)), scales_(std::move(scales)), c_in_(c_in), d_(d), seed_(seed) {
    validate_arguments(c_in_, d_, scales_);
    if (banks_.size() != scales_.size()) {
      throw ContractError("Fourier bank: " + std::to_string(banks_.size()) + " matrices but " +
                          std::to_string(scales_.size()) + " scales");
    }
    for (const Tensor& b : banks_) {
      if (b.shape() != Shape{d_ / 2, c_in_}) {
        throw DimensionError("Fourier bank matrix has shape " + shape_string(b.shape()) + ", expected " +
                             shape_string(Shape{d_ / 2, c_in_}));
      }
    }
  }

  const std::vector<Tensor>& banks() const noexcept { return banks_; }
  const std::vector<double>& scales() const noexcept { return scales_; }
  std::size_t input_dim() const noexcept { return c_in_; }
  std::size_t bank_width() const noexcept { return d_; }
  std::size_t bank_count() const noexcept { return banks_.size(); }
  std::size_t output_dim() const noexcept { return d_ * banks_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Upper bound on the Lipschitz constant of encode() in the Euclidean norm:
  /// 2 pi times the Frobenius norm of all B_k stacked.
  double lipschitz_bound() const {
    double sq = 0.0;
    for (const Tensor& b : banks_) {
      for (double v : b.values()) sq += v * v;
    }
    return 2.0 * std::numbers::pi * std::sqrt(sq);
  }

  static void validate_arguments(std::size_t c_in, std::size_t d, const std::vector<double>& scales) {
    if (c_in == 0) throw ContractError("Fourier bank: input dimension must be positive");
    if (d < 2 || d % 2 != 0) throw ContractError("Fourier bank: width d must be even and >= 2, got " + std::to_string(d));
    if (scales.empty()) throw ContractError("Fourier bank: at least one scale is required");
    for (double s : scales) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw ContractError("Fourier bank: variances must be positive and finite, got " + std::to_string(s));
      }
    }
  }

 private:
  std::vector<Tensor> banks_;
  std::vector<double> scales_;
  std::size_t c_in_;
  std::size_t d_;
  std::uint64_t seed_;
};

/// Samples one (d/2) x c_in matrix per variance in `scales`, in order, from a
/// single seeded stream.
inline FourierFeatureBank sample_bank(std::size_t c_in, std::size_t d, const std::vector<double>& scales,
                                      std::uint64_t seed) {
  FourierFeatureBank::validate_arguments(c_in, d, scales);
  Rng rng(seed);
  std::vector<Tensor> banks;
  banks.reserve(scales.size());
  for (double variance : scales) {
    const double stddev = std::sqrt(variance);
    Tensor b(Shape{d / 2, c_in});
    for (double& v : b.storage()) v = stddev * rng.normal();
    banks.push_back(std::move(b));
  }
  return FourierFeatureBank(std::move(banks), scales, c_in, d, seed);
}

/// gamma(v) for a batch of coordinates [M x c_in] -> [M x d*N_f].
inline Tensor encode(const FourierFeatureBank& bank, const Tensor& coords) {
  if (coords.rank() != 2 || coords.cols() != bank.input_dim()) {
    throw DimensionError("encode: coordinates " + shape_string(coords.shape()) + " do not have " +
                         std::to_string(bank.input_dim()) + " columns");
  }
  const std::size_t rows = coords.rows();
  const std::size_t half = bank.bank_width() / 2;
  const std::size_t width = bank.output_dim();
  const double two_pi = 2.0 * std::numbers::pi;
  Tensor out(Shape{rows, width});
  for (std::size_t k = 0; k < bank.bank_count(); ++k) {
    const Tensor& b = bank.banks()[k];
    const std::size_t sin_col = k * bank.bank_width();
    const std::size_t cos_col = sin_col + half;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < half; ++j) {
        double proj = 0.0;
        for (std::size_t c = 0; c < bank.input_dim(); ++c) proj += b.at(j, c) * coords.at(r, c);
        const double angle = two_pi * proj;
        out[r * width + sin_col + j] = std::sin(angle);
        out[r * width + cos_col + j] = std::cos(angle);
      }
    }
  }
  return out;
}

}  // namespace tinr
