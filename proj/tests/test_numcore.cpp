// Copyright 2026 The RTGMFF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "rtgmff/num/grad_check.hpp"
#include "rtgmff/num/ops.hpp"
#include "rtgmff/num/optim.hpp"
#include "rtgmff/num/rng.hpp"
#include "rtgmff/num/scan.hpp"
#include "rtgmff/num/tape.hpp"
#include "rtgmff/num/tensor.hpp"

using namespace rtgmff::num;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  auto n = shape_numel(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = scale * rng.gaussian();
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0}, {}), std::invalid_argument);
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK(t.at({1, 0}) == 3);
  CHECK(t.grad().size() == 4);  // zeros when never touched by backward
}

TEST_CASE("softmax of uniform logits is uniform") {
  Tensor x({3}, {0, 0, 0});
  Tensor y = softmax(x, 0);
  for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(7);
  Tensor x = random_tensor({5, 9}, rng, 3.0);
  Tensor y = softmax(x, 1);
  for (int r = 0; r < 5; ++r) {
    double s = 0;
    for (int c = 0; c < 9; ++c) s += y.at({r, c});
    CHECK(std::abs(s - 1.0) < 1e-12);
    for (int c = 0; c < 9; ++c) CHECK(y.at({r, c}) >= 0.0);
  }
}

TEST_CASE("matmul identity") {
  Rng rng(3);
  Tensor m = random_tensor({3, 3}, rng);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor y = matmul(eye, m);
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == doctest::Approx(m.data()[i]).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})),
                       doctest::Contains("matmul"), std::invalid_argument);
}

TEST_CASE("conv2d of ones, 2x2 kernel stride 2") {
  // Hand sum: each 2x2 window of ones with a ones kernel gives 4.
  Tensor x = Tensor::full({4, 4, 1}, 1.0);
  Tensor w = Tensor::full({2, 2, 1, 1}, 1.0);
  Tensor y = conv2d(x, w, 2, 0);
  CHECK(y.shape() == Shape{2, 2, 1});
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(4.0));
}

TEST_CASE("conv and pool output extents follow floor((n+2p-k)/s)+1") {
  struct Case {
    std::int64_t n;
    int k, p, s;
  };
  for (Case c : {Case{7, 3, 1, 2}, Case{8, 2, 0, 2}, Case{9, 3, 0, 1}, Case{16, 5, 2, 3}}) {
    Tensor x = Tensor::full({c.n, c.n, 2}, 0.5);
    Tensor w = Tensor::full({c.k, c.k, 2, 3}, 0.1);
    Tensor y = conv2d(x, w, c.s, c.p);
    const std::int64_t expect = (c.n + 2 * c.p - c.k) / c.s + 1;
    CHECK(y.dim(0) == expect);
    CHECK(y.dim(1) == expect);
    Tensor pooled = avg_pool2d(x, c.k, c.s, c.p);
    CHECK(pooled.dim(0) == expect);
  }
}

TEST_CASE("avg_pool of constant field is the constant") {
  Tensor x = Tensor::full({6, 6, 3}, 2.5);
  Tensor y = avg_pool2d(x, 2, 2);
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("backward of sum gives all-ones") {
  Tensor x = Tensor({4}, {1, 2, 3, 4}, true);
  Tensor loss = sum(x);
  Tape::active().backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward of sum of squares") {
  Tensor x = Tensor({2}, {1, 2}, true);
  Tensor loss = sum(mul(x, x));
  Tape::active().backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward requires scalar loss") {
  Tensor x = Tensor({2}, {1, 2}, true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(Tape::active().backward(y), std::invalid_argument);
  Tape::active().clear();
}

TEST_CASE("relu gradient at exactly zero is zero") {
  Tensor x = Tensor({3}, {-1.0, 0.0, 2.0}, true);
  Tensor loss = sum(relu(x));
  Tape::active().backward(loss);
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);  // subgradient convention, exempt from FD checks
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("non-finite forward values raise") {
  Tensor x({1}, {1e4});
  CHECK_THROWS_AS((void)exp(x), std::runtime_error);
}

TEST_CASE("grad_check on a linear graph is at machine precision") {
  Rng rng(11);
  Tensor w = random_tensor({3, 2}, rng);
  auto builder = [&](const std::vector<Tensor>& leaves) {
    return sum(matmul(leaves[0], w));
  };
  auto report = grad_check(builder, {random_tensor({2, 3}, rng)}, {"x"});
  CHECK(report.max_rel_err() < 1e-8);
}

TEST_CASE("gradients match finite differences on a graph using every op") {
  Rng rng(1234);
  Tensor img = random_tensor({6, 6, 2}, rng, 0.7);
  Tensor kernel = random_tensor({3, 3, 2, 3}, rng, 0.4);
  Tensor cbias = random_tensor({3}, rng, 0.1);
  Tensor dw = random_tensor({3, 3, 3}, rng, 0.3);
  Tensor gamma = Tensor::full({3}, 1.1);
  Tensor beta = Tensor::full({3}, 0.1);
  Tensor lngamma = Tensor::full({6}, 0.9);
  Tensor lnbeta = Tensor::full({6}, -0.05);
  Tensor wmat = random_tensor({12, 6}, rng, 0.5);
  Tensor bias = random_tensor({6}, rng, 0.2);

  auto builder = [&](const std::vector<Tensor>& leaves) {
    const Tensor& x = leaves[0];
    const Tensor& k = leaves[1];
    const Tensor& cb = leaves[2];
    const Tensor& dwk = leaves[3];
    const Tensor& g = leaves[4];
    const Tensor& b = leaves[5];
    const Tensor& w = leaves[6];
    const Tensor& bi = leaves[7];

    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::full({3}, 1.0);
    Tensor c = conv2d(x, k, cb, 1, 1, PadMode::kReflect);      // [6,6,3]
    c = depthwise_conv2d(c, dwk, Tensor(), 1, 1, PadMode::kZero);
    c = batch_norm(c, g, b, rm, rv, /*training=*/true);
    c = relu(add_scalar(c, 0.05));
    c = avg_pool2d(c, 2, 2);                                   // [3,3,3]
    c = upsample_nearest2(c);                                  // [6,6,3]
    Tensor t = transpose(c, {2, 0, 1});                        // [3,6,6]
    Tensor flat = reshape(t, {9, 12});
    Tensor h = add(matmul(flat, w), bi);                       // [9,6]
    h = layer_norm(h, lngamma, lnbeta);
    Tensor sm = softmax(h, 1);
    Tensor pieces = concat({slice(sm, 0, 0, 4), slice(sm, 0, 4, 5)}, 0);
    Tensor act = sigmoid(pieces);
    act = mul(act, softplus(act));
    act = log(add_scalar(act, 1.0));
    act = sqrt(add_scalar(act, 0.5));
    Tensor row = mean_axis(act, 0);                            // [6]
    Tensor cs = cosine_similarity(row, sum_axis(sm, 0));
    Tensor total = add(mean(act), mul(Tensor::scalar(0.3), cs));
    return add(sub(sum(exp(scale(total, 0.1))), div(total, Tensor::scalar(2.0))), neg(total));
  };

  auto report = grad_check(builder, {img, kernel, cbias, dw, gamma, beta, wmat, bias},
                           {"img", "kernel", "cbias", "dw", "gamma", "beta", "w", "bias"});
  for (const auto& leaf : report.leaves) {
    INFO(leaf.name);
    CHECK(leaf.max_rel_err < 1e-4);
  }
}

TEST_CASE("adamw zero gradient and zero decay leaves params unchanged") {
  Tensor p({3}, {1.0, -2.0, 0.5});
  std::vector<Tensor> params{p};
  OptimState st;
  st.weight_decay = 0.0;
  adamw_step(params, {std::vector<double>(3, 0.0)}, st, 1e-2);
  CHECK(params[0].data()[0] == 1.0);
  CHECK(params[0].data()[1] == -2.0);
  CHECK(params[0].data()[2] == 0.5);
}

TEST_CASE("adamw first step follows the closed-form update") {
  // One step from zero state with bias correction collapses to
  // -lr * g / (|g| + eps).
  Tensor p({2}, {0.3, -0.7});
  std::vector<Tensor> params{p};
  OptimState st;
  st.weight_decay = 0.0;
  const std::vector<double> g{0.25, -1.5};
  const double lr = 1e-3;
  adamw_step(params, {g}, st, lr);
  for (int i = 0; i < 2; ++i) {
    const double expect = (i == 0 ? 0.3 : -0.7) - lr * g[static_cast<std::size_t>(i)] /
                          (std::abs(g[static_cast<std::size_t>(i)]) + 1e-8);
    CHECK(params[0].data()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("adamw decoupled weight decay only") {
  Tensor p({2}, {2.0, -4.0});
  std::vector<Tensor> params{p};
  OptimState st;
  st.weight_decay = 0.1;
  const double lr = 1e-2;
  adamw_step(params, {std::vector<double>(2, 0.0)}, st, lr);
  CHECK(params[0].data()[0] == doctest::Approx(2.0 * (1 - lr * 0.1)).epsilon(1e-14));
  CHECK(params[0].data()[1] == doctest::Approx(-4.0 * (1 - lr * 0.1)).epsilon(1e-14));
}

TEST_CASE("adamw is bit-deterministic") {
  Rng rng(55);
  auto run = [&](std::uint64_t seed) {
    Rng r(seed);
    Tensor p = random_tensor({16}, r);
    std::vector<Tensor> params{p};
    OptimState st;
    for (int step = 0; step < 25; ++step) {
      std::vector<double> g(16);
      for (auto& v : g) v = r.gaussian();
      adamw_step(params, {g}, st, 3e-4);
    }
    return params[0].values();
  };
  auto a = run(99);
  auto b = run(99);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("learning-rate schedule endpoints and midpoint") {
  const double base = 1e-4;
  CHECK(lr_at(5, 5, 45, base) == doctest::Approx(base));
  CHECK(lr_at(45, 5, 45, base) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(lr_at(25, 5, 45, base) == doctest::Approx(base / 2).epsilon(1e-12));
  CHECK(lr_at(0, 5, 45, base) == doctest::Approx(0.0));
  CHECK_THROWS_AS(lr_at(46, 5, 45, base), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(3, 5, 5, base), std::invalid_argument);
}

TEST_CASE("selective_scan matches a hand-unrolled EMA recurrence") {
  // Single channel, n = 1, constant delta: the recurrence is an
  // exponentially weighted sum, unrolled here independently.
  const int L = 20;
  Rng rng(42);
  std::vector<double> xs(L);
  for (auto& v : xs) v = rng.gaussian();
  Tensor x({L, 1}, xs);
  const double a_val = 0.3, delta0 = 0.5, b0 = 1.0, c0 = 0.8, skip = 0.25, gbias = 0.3;
  Tensor a_log({1, 1}, {std::log(a_val)});
  Tensor w_dt({1, 1}, {0.0}), b_dt({1}, {std::log(std::exp(delta0) - 1.0)});
  Tensor w_b({1, 1}, {0.0}), b_b({1}, {b0});
  Tensor w_c({1, 1}, {0.0}), b_c({1}, {c0});
  Tensor d_skip({1}, {skip});
  Tensor w_g({1, 1}, {0.0}), b_g({1}, {gbias});
  Tensor y = selective_scan(x, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g);

  const double abar = std::exp(delta0 * -a_val);
  const double gate = 1.0 / (1.0 + std::exp(-gbias));
  double s = 0.0;
  for (int t = 0; t < L; ++t) {
    s = abar * s + delta0 * b0 * xs[static_cast<std::size_t>(t)];
    const double expect = gate * (c0 * s + skip * xs[static_cast<std::size_t>(t)]);
    CHECK(y.data()[t] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("selective_scan gate forced to zero suppresses everything") {
  Rng rng(9);
  Tensor x = random_tensor({8, 2}, rng);
  Tensor a_log = random_tensor({2, 3}, rng, 0.2);
  Tensor w_dt = random_tensor({2, 2}, rng, 0.2), b_dt = Tensor::zeros({2});
  Tensor w_b = random_tensor({2, 3}, rng, 0.2), b_b = Tensor::zeros({3});
  Tensor w_c = random_tensor({2, 3}, rng, 0.2), b_c = Tensor::zeros({3});
  Tensor d_skip = Tensor::full({2}, 1.0);
  Tensor w_g = Tensor::zeros({2, 2}), b_g = Tensor::full({2}, -1e9);
  Tensor y = selective_scan(x, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g);
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("selective_scan skip-only configuration is the identity") {
  Rng rng(10);
  Tensor x = random_tensor({10, 3}, rng);
  Tensor a_log = Tensor::full({3, 2}, std::log(50.0));  // Abar ~ 0
  Tensor w_dt = Tensor::zeros({3, 3}), b_dt = Tensor::full({3}, 5.0);
  Tensor w_b = Tensor::zeros({3, 2}), b_b = Tensor::full({2}, 1.0);
  Tensor w_c = Tensor::zeros({3, 2}), b_c = Tensor::zeros({2});
  Tensor d_skip = Tensor::full({3}, 1.0);
  Tensor w_g = Tensor::zeros({3, 3}), b_g = Tensor::full({3}, 40.0);  // gate ~ 1
  Tensor y = selective_scan(x, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g);
  for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("selective_scan is causal") {
  Rng rng(21);
  Tensor x = random_tensor({12, 3}, rng);
  Tensor a_log = random_tensor({3, 2}, rng, 0.3);
  Tensor w_dt = random_tensor({3, 3}, rng, 0.3), b_dt = random_tensor({3}, rng, 0.2);
  Tensor w_b = random_tensor({3, 2}, rng, 0.3), b_b = random_tensor({2}, rng, 0.2);
  Tensor w_c = random_tensor({3, 2}, rng, 0.3), b_c = random_tensor({2}, rng, 0.2);
  Tensor d_skip = random_tensor({3}, rng, 0.5);
  Tensor w_g = random_tensor({3, 3}, rng, 0.3), b_g = random_tensor({3}, rng, 0.2);
  Tensor y1 = selective_scan(x, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g);
  Tensor x2 = x.clone();
  x2.at_ref({7, 1}) = 5.0;
  Tensor y2 = selective_scan(x2, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g);
  for (std::int64_t t = 0; t < 7; ++t) {
    for (std::int64_t d = 0; d < 3; ++d) CHECK(y1.at({t, d}) == y2.at({t, d}));
  }
  bool differs = false;
  for (std::int64_t t = 7; t < 12; ++t) {
    for (std::int64_t d = 0; d < 3; ++d) differs = differs || y1.at({t, d}) != y2.at({t, d});
  }
  CHECK(differs);
}

TEST_CASE("selective_scan gradients match finite differences") {
  Rng rng(77);
  Tensor x = random_tensor({6, 3}, rng, 0.8);
  Tensor a_log = random_tensor({3, 2}, rng, 0.3);
  Tensor w_dt = random_tensor({3, 3}, rng, 0.3), b_dt = random_tensor({3}, rng, 0.2);
  Tensor w_b = random_tensor({3, 2}, rng, 0.3), b_b = random_tensor({2}, rng, 0.2);
  Tensor w_c = random_tensor({3, 2}, rng, 0.3), b_c = random_tensor({2}, rng, 0.2);
  Tensor d_skip = random_tensor({3}, rng, 0.5);
  Tensor w_g = random_tensor({3, 3}, rng, 0.3), b_g = random_tensor({3}, rng, 0.2);
  auto builder = [](const std::vector<Tensor>& v) {
    Tensor y = selective_scan(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]);
    return sum(mul(y, y));
  };
  auto report = grad_check(builder, {x, a_log, w_dt, b_dt, w_b, b_b, w_c, b_c, d_skip, w_g, b_g},
                           {"x", "a_log", "w_dt", "b_dt", "w_b", "b_b", "w_c", "b_c", "d_skip", "w_g", "b_g"});
  for (const auto& leaf : report.leaves) {
    INFO(leaf.name);
    CHECK(leaf.max_rel_err < 1e-4);
  }
}

TEST_CASE("cross entropy of uniform logits is log C") {
  Tensor logits({4}, {0, 0, 0, 0});
  CHECK(cross_entropy(logits, 2).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy(logits, 4), std::invalid_argument);
}

TEST_CASE("cosine similarity basics") {
  Tensor a({2}, {1, 0});
  Tensor b({2}, {0, 1});
  CHECK(cosine_similarity(a, b).item() == doctest::Approx(0.0));
  CHECK(cosine_similarity(a, a).item() == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_similarity(a, Tensor::zeros({2})), std::runtime_error);
}

TEST_CASE("batch_norm train standardizes and updates running stats") {
  Rng rng(5);
  Tensor x = random_tensor({4, 4, 2}, rng, 2.0);
  Tensor gamma = Tensor::full({2}, 1.0), beta = Tensor::zeros({2});
  Tensor rm = Tensor::zeros({2}), rv = Tensor::full({2}, 1.0);
  Tensor y = batch_norm(x, gamma, beta, rm, rv, true);
  for (int c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (int i = 0; i < 16; ++i) m += y.data()[i * 2 + c];
    m /= 16;
    for (int i = 0; i < 16; ++i) v += (y.data()[i * 2 + c] - m) * (y.data()[i * 2 + c] - m);
    v /= 16;
    CHECK(std::abs(m) < 1e-10);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rm.data()[c] != 0.0);  // momentum 0.1 folded the batch mean in
  }
  // Eval mode must not touch the running buffers.
  const double rm0 = rm.data()[0];
  (void)batch_norm(x, gamma, beta, rm, rv, false);
  CHECK(rm.data()[0] == rm0);
}
