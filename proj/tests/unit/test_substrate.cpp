#include <doctest.h>

#include <cmath>
#include <limits>

#include "aigflow/error.hpp"
#include "aigflow/gradcheck.hpp"
#include "aigflow/params.hpp"
#include "aigflow/tensor.hpp"

using namespace aigflow;
using doctest::Approx;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("matmul, add with broadcast, concat, gather") {
  const auto a = Tensor::constant(2, 3, {1, 2, 3, 4, 5, 6});
  const auto b = Tensor::constant(3, 2, {7, 8, 9, 10, 11, 12});
  CHECK(vals(ops::matmul(a, b)) == std::vector<double>{58, 64, 139, 154});
  CHECK(vals(ops::add(a, Tensor::constant(1, 3, {1, 0, -1}))) == std::vector<double>{2, 2, 2, 5, 5, 5});
  CHECK_THROWS_AS(ops::matmul(a, a), Error);
  CHECK_THROWS_AS(ops::add(a, b), Error);

  const std::vector<Tensor> parts = {a, Tensor::constant(2, 1, {0, -1})};
  const auto c = ops::concat_cols(parts);
  CHECK(c.cols() == 4);
  CHECK(vals(c) == std::vector<double>{1, 2, 3, 0, 4, 5, 6, -1});
  const std::vector<std::uint32_t> idx = {1, 1, 0};
  CHECK(vals(ops::gather_rows(a, idx)) == std::vector<double>{4, 5, 6, 4, 5, 6, 1, 2, 3});
  const std::vector<std::uint32_t> bad = {2};
  CHECK_THROWS_AS(ops::gather_rows(a, bad), Error);
}

TEST_CASE("segment ops: empty segments and singletons") {
  const auto x = Tensor::constant(4, 1, {1.0, 2.0, 3.0, -7.0});
  const std::vector<std::uint32_t> seg = {0, 0, 2, 3};
  CHECK(vals(ops::segment_sum(x, seg, 4)) == std::vector<double>{3.0, 0.0, 3.0, -7.0});
  const auto s = vals(ops::segment_softmax(x, seg, 4));
  CHECK(s[0] == Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));
  CHECK(s[0] + s[1] == Approx(1.0).epsilon(1e-15));
  CHECK(s[2] == 1.0);
  CHECK(s[3] == 1.0);
  // large logits stay finite
  const auto big = vals(ops::segment_softmax(Tensor::constant(2, 1, {1000.0, 999.0}), std::vector<std::uint32_t>{0, 0}, 1));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] == Approx(1.0));
}

TEST_CASE("elementwise activations and layer norm") {
  const auto x = Tensor::constant(1, 4, {-2.0, -0.5, 0.0, 3.0});
  CHECK(vals(ops::relu(x)) == std::vector<double>{0, 0, 0, 3});
  CHECK(vals(ops::leaky_relu(x, 0.2)) == std::vector<double>{-0.4, -0.1, 0, 3});
  CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ops::softplus(Tensor::scalar(0.0)).item() == Approx(std::log(2.0)));
  CHECK(ops::softplus(Tensor::scalar(800.0)).item() == Approx(800.0));
  const auto n = vals(ops::layer_norm(x, 0.0));
  double mean = 0, var = 0;
  for (double v : n) mean += v / 4;
  for (double v : n) var += (v - mean) * (v - mean) / 4;
  CHECK(mean == Approx(0.0).epsilon(1e-12));
  CHECK(var == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("losses: closed forms") {
  const auto p = Tensor::constant(4, 1, {0.5, 0.5, 0.5, 0.5});
  const auto y = Tensor::constant(4, 1, {0, 1, 1, 0});
  CHECK(ops::bce_loss(p, y).item() == Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(ops::l1_loss(Tensor::constant(2, 1, {1.0, 4.0}), Tensor::constant(2, 1, {2.0, 1.0})).item() == 2.0);
  // clamping keeps saturated predictions finite
  const double clamped = ops::bce_loss(Tensor::constant(1, 1, {0.0}), Tensor::constant(1, 1, {1.0})).item();
  CHECK(clamped == Approx(-std::log(1e-7)));
}

TEST_CASE("head ops") {
  const auto q = Tensor::constant(1, 4, {1, 2, 3, 4});
  const auto k = Tensor::constant(1, 4, {1, 1, 2, 0});
  CHECK(vals(ops::head_dot(q, k, 2)) == std::vector<double>{3, 6});
  CHECK(vals(ops::head_scale(Tensor::constant(1, 2, {2, -1}), q)) == std::vector<double>{2, 4, -3, -4});
  CHECK_THROWS_AS(ops::head_dot(q, k, 3), Error);
}

TEST_CASE("backward: hand-derived gradients") {
  // L = sum((W x)^2) -> dL/dW = 2 (W x) x^T
  const auto w = Tensor::parameter(2, 2, {1, 2, 3, 4});
  const auto x = Tensor::constant(2, 1, {1, -1});
  const auto y = ops::matmul(w, x);
  backward(ops::sum(ops::mul(y, y)));
  CHECK(vals(y) == std::vector<double>{-1, -1});
  CHECK(std::vector<double>(w.grad().begin(), w.grad().end()) == std::vector<double>{-2, 2, -2, 2});
}

TEST_CASE("backward twice throws; reset allows a second pass that accumulates") {
  auto w = Tensor::parameter(1, 1, {3.0});
  const auto loss = ops::mul(w, w);
  backward(loss);
  CHECK(w.grad()[0] == 6.0);
  CHECK_THROWS_AS(backward(loss), Error);
  auto root = loss;
  root.reset_backward();
  backward(root);
  CHECK(w.grad()[0] == 12.0);
  w.zero_grad();
  CHECK(w.grad().empty());
  CHECK_THROWS_AS(backward(Tensor::constant(1, 2, {1, 2})), Error);
}

TEST_CASE("detach and grad_of") {
  const auto w = Tensor::parameter(1, 1, {2.0});
  const auto y = ops::add(ops::mul(w, w), ops::mul(w.detach(), w));
  const std::vector<Tensor> targets = {w};
  const auto g = grad_of(y, targets);
  CHECK(g[0][0] == Approx(6.0));  // 2w + w
  CHECK(w.grad().empty());
  CHECK_FALSE(ops::mul(w.detach(), w.detach()).requires_grad());
}

TEST_CASE("checked mode catches non-finite values") {
  set_checked_mode(true);
  CHECK_THROWS_AS(ops::scale(Tensor::scalar(std::numeric_limits<double>::max()), 10.0), Error);
  set_checked_mode(false);
  CHECK_NOTHROW(ops::scale(Tensor::scalar(std::numeric_limits<double>::max()), 10.0));
}

TEST_CASE("grad_check against an independent finite difference") {
  const auto a = Tensor::parameter(2, 2, {0.3, -1.2, 0.7, 0.4});
  auto f = [](const std::vector<Tensor>& in) {
    return ops::sum(ops::sigmoid(ops::matmul(in[0], in[0])));
  };
  CHECK(grad_check(f, {a}) < 1e-7);

  // the analytic gradient against a hand-rolled central difference
  backward(f({a}));
  const std::vector<double> analytic(a.grad().begin(), a.grad().end());
  auto raw = [](std::vector<double> m) {
    const double p[4] = {m[0] * m[0] + m[1] * m[2], m[0] * m[1] + m[1] * m[3], m[2] * m[0] + m[3] * m[2],
                         m[2] * m[1] + m[3] * m[3]};
    double s = 0;
    for (double v : p) s += 1.0 / (1.0 + std::exp(-v));
    return s;
  };
  const std::vector<double> base = {0.3, -1.2, 0.7, 0.4};
  for (int i = 0; i < 4; ++i) {
    auto up = base, dn = base;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    CHECK(analytic[i] == Approx((raw(up) - raw(dn)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("gradient check suite over ops and the model") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const auto& e : gradcheck_suite(seed)) {
      CAPTURE(e.name);
      CHECK(e.elements > 0);
      CHECK(e.rel_err < 1e-4);
    }
  }
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [] {
    const auto w = Tensor::parameter(3, 3, {0.1, 0.2, -0.3, 0.4, -0.5, 0.6, 0.7, 0.8, -0.9});
    const std::vector<std::uint32_t> seg = {0, 1, 0};
    auto s = ops::segment_softmax(ops::matmul(w, w), seg, 2);
    backward(ops::sum(ops::mul(s, w)));
    return std::vector<double>(w.grad().begin(), w.grad().end());
  };
  CHECK(run() == run());
}

TEST_CASE("parameter registry") {
  ParamRegistry reg;
  reg.add_glorot("w", 4, 3, 9);
  reg.add_zeros("b", 1, 3);
  CHECK_THROWS_AS(reg.add_zeros("b", 1, 3), Error);
  CHECK(reg.element_count() == 15);
  const double bound = std::sqrt(6.0 / 7.0);
  for (double v : reg.get("w").values()) CHECK(std::abs(v) <= bound);
  ParamRegistry again;
  again.add_glorot("w", 4, 3, 9);
  CHECK(vals(again.get("w")) == vals(reg.get("w")));
}

TEST_CASE("Adam: first step closed form; lr=0 only counts") {
  ParamRegistry reg;
  auto w = reg.add("w", 1, 2, {1.0, -1.0});
  Adam adam(reg, {.lr = 0.1});
  backward(ops::sum(ops::mul(w, Tensor::constant(1, 2, {3.0, -0.5}))));
  adam.step();
  // bias-corrected m = g, v = g^2 at t = 1
  CHECK(w.values()[0] == Approx(1.0 - 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-15));
  CHECK(w.values()[1] == Approx(-1.0 + 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));

  ParamRegistry frozen;
  auto u = frozen.add("u", 1, 1, {2.0});
  Adam still(frozen, {.lr = 0.0});
  for (int i = 0; i < 3; ++i) {
    backward(ops::mul(u, u));
    still.step();
  }
  CHECK(u.values()[0] == 2.0);
  CHECK(still.step_count() == 3);
}
