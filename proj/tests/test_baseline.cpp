#include <catch2/catch.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "tinr/baseline.hpp"

using namespace tinr;

namespace {

GridField low_rank_field(std::size_t S, std::size_t T, std::size_t r, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor u = testing::random_tensor({S, r}, rng), v = testing::random_tensor({T, r}, rng);
  Tensor y(Shape{S, T});
  y.matrix() = u.matrix() * v.matrix().transpose();
  return GridField(std::move(y), linspace(0, 1, S), linspace(0, 1, T));
}

double rmse_all(const Tensor& a, const Tensor& b) {
  return metrics(a, b, ObservationMask::full(a.rows(), a.cols())).rmse;
}

}  // namespace

TEST_CASE("rank-1 matrix is recovered", "[baseline]") {
  const GridField f = low_rank_field(12, 10, 1, 1);
  const MfFit fit = fit_mf(f, ObservationMask::full(12, 10), MfConfig{1, 1e-9, 50, 2});
  CHECK(rmse_all(fit.model.reconstruct(), f.values()) < 1e-6);
}

TEST_CASE("full rank with vanishing ridge interpolates", "[baseline]") {
  const GridField f = low_rank_field(6, 5, 5, 3);
  const MfFit fit = fit_mf(f, ObservationMask::full(6, 5), MfConfig{5, 1e-14, 200, 4});
  CHECK(rmse_all(fit.model.reconstruct(), f.values()) < 1e-8);
}

TEST_CASE("ALS objective is monotone", "[baseline][property]") {
  const GridField f = low_rank_field(20, 15, 3, 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto mask = make_mask(f, MaskSpec{MaskPattern::kRandom, 0.6, seed, {}});
    const MfFit fit = fit_mf(f, mask, MfConfig{2, 1e-2, 30, seed});
    REQUIRE(fit.objective.size() == 31);
    for (std::size_t k = 1; k < fit.objective.size(); ++k) CHECK(fit.objective[k] <= fit.objective[k - 1] * (1 + 1e-12));
  }
}

TEST_CASE("reconstruction rank is at most r", "[baseline]") {
  const GridField f = low_rank_field(20, 16, 8, 6);
  const MfFit fit = fit_mf(f, ObservationMask::full(20, 16), MfConfig{3, 1e-3, 10, 1});
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(fit.model.reconstruct().matrix()));
  const auto& s = svd.singularValues();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > 1e-8 * s(0);
  CHECK(rank <= 3);
}

TEST_CASE("singular normal equations ask for a larger ridge", "[baseline]") {
  // An unobserved row has an all-zero Gram matrix when lambda = 0.
  const GridField f = low_rank_field(4, 4, 1, 7);
  const ObservationMask m = make_mask(f, MaskSpec{MaskPattern::kSensorSubset, 1.0, 0, {0, 1, 2}});
  try {
    fit_mf(f, m, MfConfig{1, 0.0, 5, 1});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("lambda") != std::string::npos);
  }
  CHECK_THROWS_AS(fit_mf(f, m, MfConfig{5, 1e-3, 5, 1}), ConfigError);
}

TEST_CASE("underdetermined fits are flagged", "[baseline]") {
  const GridField f = low_rank_field(10, 10, 1, 8);
  const auto m = make_mask(f, MaskSpec{MaskPattern::kRandom, 0.3, 1, {}});
  CHECK(fit_mf(f, m, MfConfig{4, 1e-2, 3, 1}).underdetermined);
  CHECK_FALSE(fit_mf(f, ObservationMask::full(10, 10), MfConfig{1, 1e-2, 3, 1}).underdetermined);
}

TEST_CASE("metrics", "[baseline][metrics]") {
  Rng rng(9);
  const Tensor truth = testing::random_tensor({6, 7}, rng);
  const ObservationMask all = ObservationMask::full(6, 7);
  const Metrics zero = metrics(truth, truth, all);
  CHECK(zero.rmse == 0.0);
  CHECK(zero.mae == 0.0);
  CHECK(zero.relative_l2 == 0.0);

  Tensor shifted = truth;
  for (double& v : shifted.storage()) v += 0.25;
  const Metrics off = metrics(shifted, truth, all);
  CHECK(std::abs(off.rmse - 0.25) < 1e-12);
  CHECK(std::abs(off.mae - 0.25) < 1e-12);

  const Tensor pred = testing::random_tensor({6, 7}, rng);
  const Metrics m = metrics(pred, truth, all);
  CHECK(m.rmse >= m.mae);

  // Permuting cells consistently leaves the metrics unchanged.
  Tensor pp(Shape{6, 7}), tp(Shape{6, 7});
  for (std::size_t k = 0; k < 42; ++k) {
    pp[k] = pred[41 - k];
    tp[k] = truth[41 - k];
  }
  const Metrics mp = metrics(pp, tp, all);
  CHECK(std::abs(mp.rmse - m.rmse) < 1e-12);
  CHECK(std::abs(mp.mae - m.mae) < 1e-12);

  Tensor sp = pred, st = truth;
  for (double& v : sp.storage()) v *= 3.0;
  for (double& v : st.storage()) v *= 3.0;
  CHECK(std::abs(metrics(sp, st, all).rmse - 3.0 * m.rmse) < 1e-12);

  CHECK_THROWS_AS(metrics(pred, Tensor(Shape{6, 6}), all), DimensionError);
  CHECK(metrics_csv(off).rfind("metric,value\nrmse,", 0) == 0);
}

TEST_CASE("metrics honour the scope", "[baseline][metrics]") {
  const Tensor truth = Tensor::matrix(2, 2, {0, 0, 0, 0});
  const Tensor pred = Tensor::matrix(2, 2, {1, 0, 0, 5});
  const ObservationMask m(2, 2, {1, 1, 1, 0}, MaskPattern::kRandom);
  CHECK(std::abs(metrics(pred, truth, m).rmse - std::sqrt(1.0 / 3.0)) < 1e-15);
  CHECK(metrics(pred, truth, m.complement()).rmse == 5.0);
  CHECK_THROWS_AS(ObservationMask::full(2, 2).complement(), ConfigError);
}
