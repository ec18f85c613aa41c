#include <catch2/catch.hpp>

#include <cmath>
#include <string>

#include "support.hpp"
#include "tinr/autodiff.hpp"
#include "tinr/encoding.hpp"
#include "tinr/inr.hpp"
#include "tinr/optim.hpp"

using namespace tinr;
using testing::numeric_grad;
using testing::random_tensor;
using testing::rel_error;

TEST_CASE("matmul forward values", "[autodiff]") {
  Graph g;
  const Var eye = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Var col = g.constant(Tensor::matrix(2, 1, {3, 4}));
  const Tensor r1 = matmul(eye, col).value();
  CHECK(r1.shape() == Shape{2, 1});
  CHECK(r1[0] == 3.0);
  CHECK(r1[1] == 4.0);

  const Var a = g.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var e2 = g.constant(Tensor::matrix(2, 1, {0, 1}));
  const Tensor r2 = matmul(a, e2).value();
  CHECK(r2[0] == 2.0);
  CHECK(r2[1] == 4.0);
}

TEST_CASE("matmul shape mismatch names both shapes", "[autodiff]") {
  Graph g;
  const Var a = g.constant(Tensor(Shape{2, 3}));
  const Var b = g.constant(Tensor(Shape{2, 3}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3] . [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences", "[autodiff]") {
  Rng rng(11);
  Tensor A = random_tensor({3, 3}, rng);
  Tensor B = random_tensor({3, 3}, rng);
  Graph g;
  const Var a = g.variable(A);
  const Var b = g.variable(B);
  g.backward(sum(matmul(a, b)));
  auto loss = [&] {
    Graph h;
    return sum(matmul(h.constant(A), h.constant(B))).value().item();
  };
  CHECK(rel_error(a.grad(), numeric_grad(A, loss, 1e-5)) < 1e-6);
  CHECK(rel_error(b.grad(), numeric_grad(B, loss, 1e-5)) < 1e-6);
}

TEST_CASE("elementwise ops", "[autodiff]") {
  Graph g;
  CHECK(sin(g.constant(Tensor::scalar(0.0))).value().item() == 0.0);
  const Tensor r = relu(g.constant(Tensor::vector({-1, 0, 2}))).value();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  Graph h;
  const Var x = h.variable(Tensor::scalar(0.3));
  h.backward(sin(x));
  CHECK(std::abs(x.grad().item() - std::cos(0.3)) < 1e-10);
}

TEST_CASE("add, sub, mul, scale, cos and row_sum gradients", "[autodiff]") {
  Rng rng(5);
  Tensor A = random_tensor({4, 3}, rng);
  Tensor B = random_tensor({4, 3}, rng);
  Tensor bias = random_tensor({3}, rng);
  auto build = [&](Graph&, const Var& a, const Var& b, const Var& c) {
    Var y = mul(add(a, scale(b, 0.7)), cos(sub(a, b)));
    return sum(row_sum(relu(add_row(y, c))));
  };
  Graph g;
  const Var a = g.variable(A), b = g.variable(B), c = g.variable(bias);
  g.backward(build(g, a, b, c));
  auto f = [&] {
    Graph h;
    return build(h, h.constant(A), h.constant(B), h.constant(bias)).value().item();
  };
  CHECK(rel_error(a.grad(), numeric_grad(A, f)) < 1e-6);
  CHECK(rel_error(b.grad(), numeric_grad(B, f)) < 1e-6);
  CHECK(rel_error(c.grad(), numeric_grad(bias, f)) < 1e-6);
}

TEST_CASE("add_row broadcast only over rows", "[autodiff]") {
  Graph g;
  const Var m = g.constant(Tensor(Shape{2, 3}));
  CHECK_THROWS_AS(add_row(m, g.constant(Tensor(Shape{2}))), DimensionError);
  CHECK_THROWS_AS(add(m, g.constant(Tensor(Shape{1, 3}))), DimensionError);
  const Tensor r = add_row(m, g.constant(Tensor::vector({1, 2, 3}))).value();
  CHECK(r.at(1, 2) == 3.0);
}

TEST_CASE("mse loss", "[autodiff]") {
  Graph g;
  const Tensor t = Tensor::matrix(2, 1, {0.5, -1.5});
  CHECK(mse_loss(g.constant(t), t).value().item() == 0.0);
  CHECK(mse_loss(g.constant(Tensor::matrix(2, 1, {1, 1})), Tensor::matrix(2, 1, {0, 0})).value().item() == 1.0);

  const Tensor p = Tensor::matrix(4, 1, {0.25, -2.0, 3.5, 1.0});
  const Tensor y = Tensor::matrix(4, 1, {1.0, 0.5, -0.5, 1.0});
  Graph h;
  const Var pv = h.variable(p);
  h.backward(mse_loss(pv, y));
  for (std::size_t i = 0; i < 4; ++i) CHECK(pv.grad()[i] == 2.0 * (p[i] - y[i]) / 4.0);

  Graph e;
  CHECK_THROWS_AS(mse_loss(e.constant(Tensor(Shape{0, 1})), Tensor(Shape{0, 1})), ContractError);
}

TEST_CASE("backward basics", "[autodiff]") {
  Graph g;
  const Var c = g.constant(Tensor::scalar(4.0));
  g.backward(c);
  CHECK(c.grad().item() == 1.0);

  Graph h;
  const Var x = h.variable(Tensor::vector({1, 2, 3}));
  h.backward(sum(mul(x, x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(x.grad()[2] == 6.0);

  Graph k;
  const Var v = k.variable(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(k.backward(scale(v, 2.0)), ContractError);
}

TEST_CASE("constants receive no gradient", "[autodiff]") {
  Graph g;
  const Var x = g.variable(Tensor::vector({1, 2}));
  const Var c = g.constant(Tensor::vector({3, 4}));
  g.backward(sum(mul(x, c)));
  CHECK_THROWS_AS(c.grad(), ContractError);
  CHECK(x.grad()[1] == 4.0);
}

TEST_CASE("fan-out sums path contributions", "[autodiff]") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor X = random_tensor({3, 2}, rng);
    Graph g;
    const Var x = g.variable(X);
    // y = sum(sin(x) + x * x + 3 x): dy/dx = cos(x) + 2x + 3
    g.backward(sum(add(add(sin(x), mul(x, x)), scale(x, 3.0))));
    for (std::size_t i = 0; i < X.size(); ++i) {
      CHECK(std::abs(x.grad()[i] - (std::cos(X[i]) + 2.0 * X[i] + 3.0)) < 1e-12);
    }
  }
}

TEST_CASE("non-finite values are rejected", "[autodiff]") {
  Graph g;
  CHECK_THROWS_AS(g.constant(Tensor::scalar(std::nan(""))), NumericalError);
  const Var big = g.constant(Tensor::scalar(1e308));
  CHECK_THROWS_AS(scale(big, 10.0), NumericalError);
}

TEST_CASE("random graphs match finite differences", "[autodiff][property]") {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), n = 1 + rng.below(4);
    Tensor A = random_tensor({m, k}, rng);
    Tensor W = random_tensor({k, n}, rng, 0.7);
    Tensor b = random_tensor({n}, rng);
    Tensor T = random_tensor({m, n}, rng);
    auto build = [&](Graph&, const Var& a, const Var& w, const Var& bb) {
      const Var h = add_row(matmul(a, w), bb);
      const Var s = trial % 2 ? sin(h) : relu(h);
      return mse_loss(add(s, scale(h, 0.25)), T);
    };
    Graph g;
    const Var a = g.variable(A), w = g.variable(W), bb = g.variable(b);
    g.backward(build(g, a, w, bb));
    auto f = [&] {
      Graph h;
      return build(h, h.constant(A), h.constant(W), h.constant(b)).value().item();
    };
    // ReLU kinks are measure-zero; skip draws that land near one.
    bool near_kink = false;
    {
      Graph h;
      const Tensor pre = add_row(matmul(h.constant(A), h.constant(W)), h.constant(b)).value();
      for (double v : pre.values()) near_kink = near_kink || std::abs(v) < 1e-4;
    }
    if (trial % 2 == 0 && near_kink) continue;
    CHECK(rel_error(a.grad(), numeric_grad(A, f)) < 1e-6);
    CHECK(rel_error(w.grad(), numeric_grad(W, f)) < 1e-6);
    CHECK(rel_error(bb.grad(), numeric_grad(b, f)) < 1e-6);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("whole-network gradient matches finite differences", "[autodiff]") {
  const auto bank = sample_bank(2, 8, {1.0, 10.0}, 1);
  InrParams net = init_inr({16, 12, 12, 1}, 30.0, 2);
  Rng rng(9);
  Tensor coords = random_tensor({10, 2}, rng, 0.5);
  Tensor target = random_tensor({10, 1}, rng);
  Graph g;
  std::vector<Var> vars;
  g.backward(mse_loss(forward(g, net, bank, coords, vars), target));
  std::size_t k = 0;
  for (auto& layer : net.layers) {
    for (Tensor* p : {&layer.weight, &layer.bias}) {
      auto f = [&] {
        Graph h;
        std::vector<Var> v;
        return mse_loss(forward(h, net, bank, coords, v), target).value().item();
      };
      CHECK(rel_error(vars[k].grad(), numeric_grad(*p, f)) < 1e-4);
      ++k;
    }
  }
}

TEST_CASE("backward is bitwise deterministic", "[autodiff]") {
  const auto bank = sample_bank(2, 16, {1.0, 10.0}, 4);
  const InrParams net = init_inr({32, 24, 24, 1}, 30.0, 5);
  Rng rng(1);
  const Tensor coords = random_tensor({64, 2}, rng, 0.5);
  const Tensor target = random_tensor({64, 1}, rng);
  auto grads = [&] {
    Graph g;
    std::vector<Var> vars;
    g.backward(mse_loss(forward(g, net, bank, coords, vars), target));
    std::vector<Tensor> out;
    for (const Var& v : vars) out.push_back(v.grad());
    return out;
  };
  const auto a = grads();
  const auto b = grads();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(bitwise_equal(a[i], b[i]));
}

TEST_CASE("optimizers", "[autodiff][optim]") {
  Tensor p = Tensor::scalar(1.0);
  sgd_step(p, Tensor::scalar(2.0), 0.1);
  CHECK(std::abs(p.item() - 0.8) < 1e-15);

  Tensor q = Tensor::vector({1.0, -2.0, 0.5});
  const Tensor g = Tensor::vector({0.3, -7.0, 1e-3});
  AdamState state;
  AdamConfig cfg;
  cfg.lr = 1e-2;
  Tensor* params[] = {&q};
  const Tensor* grads[] = {&g};
  adam_step(params, grads, state, cfg);
  // First bias-corrected step is lr * g / (|g| + eps) ~ lr * sign(g).
  CHECK(std::abs(q[0] - (1.0 - cfg.lr)) < 1e-6);
  CHECK(std::abs(q[1] - (-2.0 + cfg.lr)) < 1e-6);
  CHECK(std::abs(q[2] - (0.5 - cfg.lr)) < 1e-6);

  Tensor r = Tensor::vector({3.0, 4.0});
  const Tensor zero(Shape{2});
  AdamState s2;
  Tensor* rp[] = {&r};
  const Tensor* zp[] = {&zero};
  for (int i = 0; i < 5; ++i) adam_step(rp, zp, s2, cfg);
  CHECK(r[0] == 3.0);
  CHECK(r[1] == 4.0);

  Tensor bad = Tensor::vector({1.0});
  CHECK_THROWS_AS(sgd_step(bad, Tensor::vector({1.0, 2.0}), 0.1), DimensionError);
}
