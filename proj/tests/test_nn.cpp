// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "driftguard/nn/adam.hpp"
#include "driftguard/nn/grad_check.hpp"
#include "driftguard/nn/layers.hpp"
#include "driftguard/nn/losses.hpp"

using Catch::Approx;
using namespace driftguard;
using namespace driftguard::nn;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Plain softmax written without max-subtraction or temperature; only used on
// bounded logits.
std::vector<double> naive_softmax(const std::vector<double>& z) {
  std::vector<double> e(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += (e[i] = std::exp(z[i]));
  for (double& v : e) v /= total;
  return e;
}

// Two-layer ReLU -> identity network, used by several gradient checks.
LayerStack small_mlp(std::uint64_t seed, std::size_t in, std::size_t hidden, std::size_t out) {
  Rng rng(seed);
  std::vector<AffineLayer> layers;
  layers.push_back(glorot_layer(in, hidden, Activation::kRelu, 0.0, rng));
  layers.push_back(glorot_layer(hidden, out, Activation::kIdentity, 0.0, rng));
  for (auto& l : layers) {
    for (double& b : l.bias.values()) b = rng.uniform(-0.1, 0.1);
  }
  return LayerStack(std::move(layers));
}

}  // namespace

TEST_CASE("softmax_t worked examples", "[nn][softmax]") {
  auto p = softmax_t(std::vector<double>{0.0, 0.0}, Temperature(2.0));
  CHECK(p[0] == Approx(0.5).margin(1e-15));
  CHECK(p[1] == Approx(0.5).margin(1e-15));

  p = softmax_t(std::vector<double>{std::log(4.0), 0.0}, Temperature(1.0));
  CHECK(p[0] == Approx(0.8).margin(1e-12));
  CHECK(p[1] == Approx(0.2).margin(1e-12));

  p = softmax_t(std::vector<double>{std::log(4.0), 0.0}, Temperature(2.0));
  CHECK(p[0] == Approx(2.0 / 3.0).margin(1e-12));
  CHECK(p[1] == Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("softmax_t rejects bad input", "[nn][softmax]") {
  CHECK_THROWS_AS(softmax_t(std::vector<double>{1.0, NAN}, Temperature(1.0)), InvalidInput);
  CHECK_THROWS_AS(softmax_t(std::vector<double>{1.0, INFINITY}, Temperature(1.0)), InvalidInput);
  CHECK_THROWS_AS(Temperature(0.0), InvalidInput);
  CHECK_THROWS_AS(Temperature(-1.0), InvalidInput);
}

TEST_CASE("softmax_t identities hold on random vectors", "[nn][softmax][property]") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(12);
    const auto z = random_vector(rng, n, 20.0);
    const Temperature t(rng.uniform(0.05, 10.0));

    const auto p = softmax_t(z, t);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    REQUIRE(std::abs(total - 1.0) <= 1e-9);
    for (double v : p) REQUIRE((v >= 0.0 && v <= 1.0));

    const auto plain = softmax_t(z, Temperature(1.0));
    const auto reference = naive_softmax(z);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(plain[i] - reference[i]) <= 1e-12);

    auto shifted = z;
    const double c = rng.uniform(-50.0, 50.0);
    for (double& v : shifted) v += c;
    const auto ps = softmax_t(shifted, t);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(ps[i] - p[i]) <= 1e-12);

    auto prescaled = z;
    for (double& v : prescaled) v /= t.value();
    REQUIRE(softmax_t(prescaled, Temperature(1.0)) == p);
  }
}

TEST_CASE("softmax_t tends to uniform for huge temperature", "[nn][softmax][property]") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const auto p = softmax_t(random_vector(rng, n, 30.0), Temperature(1e6));
    for (double v : p) REQUIRE(std::abs(v - 1.0 / static_cast<double>(n)) < 1e-4);
  }
}

TEST_CASE("cross_entropy worked examples", "[nn][loss]") {
  CHECK(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{1, 0}) == 0.0);
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) ==
        Approx(0.693147).margin(1e-6));
  CHECK(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{0.8, 0.2}) ==
        Approx(0.223144).margin(1e-6));
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{1, 0, 0}),
                  InvalidInput);
  // Clamp keeps a zero prediction finite.
  CHECK(std::isfinite(cross_entropy(std::vector<double>{0, 1}, std::vector<double>{1, 0})));
}

TEST_CASE("cross_entropy satisfies Gibbs inequality", "[nn][loss][property]") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto p = softmax(random_vector(rng, n, 4.0));
    const auto q = softmax(random_vector(rng, n, 4.0));
    REQUIRE(cross_entropy(p, q) >= cross_entropy(p, p) - 1e-15);
  }
}

TEST_CASE("kd_loss worked examples", "[nn][kd]") {
  const std::vector<double> teacher{std::log(4.0), 0.0};
  CHECK(kd_loss(teacher, teacher, Temperature(1.0)) == Approx(0.500402).margin(1e-6));
  CHECK(kd_loss(teacher, std::vector<double>{0.0, 0.0}, Temperature(1.0)) ==
        Approx(std::log(2.0)).margin(1e-12));
  CHECK_THROWS_AS(kd_loss(teacher, std::vector<double>{0, 0, 0}, Temperature(1.0)), InvalidInput);
}

TEST_CASE("kd_loss gradient matches central differences", "[nn][kd]") {
  const std::vector<double> teacher{1.0, -1.0};
  std::vector<double> student{0.3, 0.7};
  const Temperature t(2.0);
  const auto analytic = kd_loss_and_grad(teacher, student, t).grad;
  const double eps = 1e-6;
  for (std::size_t j = 0; j < student.size(); ++j) {
    auto up = student;
    auto down = student;
    up[j] += eps;
    down[j] -= eps;
    const double numeric = (kd_loss(teacher, up, t) - kd_loss(teacher, down, t)) / (2 * eps);
    CHECK(relative_error(analytic[j], numeric, 0.0) < 1e-6);
  }
}

TEST_CASE("kd_loss options", "[nn][kd]") {
  const std::vector<double> teacher{1.0, -1.0, 0.5};
  const std::vector<double> student{0.2, 0.1, -0.4};
  const Temperature t(2.0);
  const auto base = kd_loss_and_grad(teacher, student, t);
  const auto scaled = kd_loss_and_grad(teacher, student, t, {.scale_student = true, .t2_scaling = true});
  CHECK(scaled.loss == Approx(4.0 * base.loss));
  CHECK(scaled.grad[1] == Approx(4.0 * base.grad[1]));

  // Teacher-only temperature: gradient is q_student(T=1) - q_teacher(T).
  const auto one_sided = kd_loss_and_grad(teacher, student, t, {.scale_student = false});
  const auto q_s = softmax(student);
  const auto q_t = softmax_t(teacher, t);
  for (std::size_t i = 0; i < 3; ++i) CHECK(one_sided.grad[i] == Approx(q_s[i] - q_t[i]));
}

TEST_CASE("kd_loss is stationary when student equals teacher", "[nn][kd][property]") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_vector(rng, 2 + rng.below(6), 5.0);
    const Temperature t(rng.uniform(0.5, 4.0));
    const auto r = kd_loss_and_grad(z, z, t);
    double norm = 0.0;
    for (double g : r.grad) norm += g * g;
    REQUIRE(std::sqrt(norm) < 1e-12);
    REQUIRE(std::abs(r.loss - entropy(softmax_t(z, t))) < 1e-12);
  }
}

TEST_CASE("forward worked examples", "[nn][forward]") {
  LayerStack identity({AffineLayer{Matrix::identity(2), Matrix(2, 1)}});
  CHECK(identity.forward(std::vector<double>{1.0, 2.0}, false) == std::vector<double>{1.0, 2.0});

  LayerStack biased({AffineLayer{Matrix(2, 3), Matrix::column({3.0, -3.0})}});
  CHECK(biased.forward(std::vector<double>{0.4, -7.0, 2.0}, false) == std::vector<double>{3.0, 0.0});

  CHECK_THROWS_AS(identity.forward(std::vector<double>{1.0}, false), InvalidInput);

  const std::vector<std::size_t> dims{5, 4, 3};
  Rng init(3);
  auto stack = LayerStack::glorot(dims, Activation::kRelu, 0.0, init);
  Rng rng(11);
  const std::vector<double> x{0.1, -0.2, 0.3, 0.0, 0.5};
  CHECK(stack.forward(x, true, &rng) == stack.forward(x, false));
}

TEST_CASE("train-mode dropout is inverted", "[nn][forward]") {
  // Identity layer with a positive input: the mean of many dropout draws
  // matches the eval output.
  LayerStack stack({AffineLayer{Matrix::identity(1), Matrix(1, 1), Activation::kRelu, 0.25}});
  Rng rng(1);
  double total = 0.0;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) total += stack.forward(std::vector<double>{2.0}, true, &rng)[0];
  CHECK(total / draws == Approx(2.0).margin(0.02));
  CHECK_THROWS_AS(stack.forward(std::vector<double>{2.0}, true, nullptr), StateError);
}

TEST_CASE("backward worked examples", "[nn][backward]") {
  LayerStack scalar({AffineLayer{Matrix(1, 1, 3.0), Matrix(1, 1), Activation::kIdentity}});
  scalar.forward(std::vector<double>{2.0}, true);
  const auto g = scalar.backward(std::vector<double>{1.0});
  CHECK(g.tensors[0](0, 0) == 2.0);
  CHECK(g.tensors[1](0, 0) == 1.0);
  CHECK(g.input[0] == 3.0);

  auto net = small_mlp(4, 3, 4, 2);
  net.forward(std::vector<double>{0.5, -0.5, 1.0}, true);
  const auto zero = net.backward(std::vector<double>{0.0, 0.0});
  for (const auto& t : zero.tensors) {
    for (double v : t.values()) CHECK(v == 0.0);
  }
  for (double v : zero.input) CHECK(v == 0.0);

  LayerStack fresh({AffineLayer{Matrix(1, 1, 3.0), Matrix(1, 1)}});
  CHECK_THROWS_AS(fresh.backward(std::vector<double>{1.0}), StateError);
  fresh.forward(std::vector<double>{1.0}, false);
  CHECK_THROWS_AS(fresh.backward(std::vector<double>{1.0}), StateError);
}

TEST_CASE("backward matches central differences on random networks", "[nn][backward][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto net = small_mlp(seed, 6, 7, 3);
    Rng rng(seed + 100);
    const auto x = random_vector(rng, 6, 1.0);
    const auto direction = random_vector(rng, 3, 1.0);
    auto loss = [&] {
      const auto y = net.forward(x, false);
      return std::inner_product(y.begin(), y.end(), direction.begin(), 0.0);
    };
    net.forward(x, true);
    const auto analytic = net.backward(direction);
    auto params = net.parameters();
    const double err = grad_check(loss, params, analytic, {.epsilon = 1e-5, .seed = seed});
    INFO("seed " << seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("adam_step basic properties", "[nn][adam]") {
  Matrix w(2, 2, std::vector<double>{1.0, -2.0, 0.5, 3.0});
  std::vector<Matrix*> params{&w};
  const Matrix before = w;

  SECTION("zero gradient leaves parameters unchanged") {
    GradientSet g{{Matrix(2, 2)}, {}};
    AdamState state;
    adam_step(params, g, 1e-3, state);
    CHECK(w == before);
  }
  SECTION("first step moves by -lr * sign(g)") {
    GradientSet g{{Matrix(2, 2, std::vector<double>{0.3, -4.0, 1e-3, -0.02})}, {}};
    AdamState state;
    adam_step(params, g, 1e-3, state);
    for (std::size_t k = 0; k < 4; ++k) {
      const double delta = w.data()[k] - before.data()[k];
      const double sign = g.tensors[0].data()[k] > 0 ? 1.0 : -1.0;
      CHECK(delta == Approx(-sign * 1e-3).epsilon(1e-4));
    }
  }
  SECTION("determinism") {
    GradientSet g{{Matrix(2, 2, std::vector<double>{0.3, -4.0, 1e-3, -0.02})}, {}};
    Matrix w2 = before;
    std::vector<Matrix*> params2{&w2};
    AdamState s1, s2;
    for (int i = 0; i < 5; ++i) {
      adam_step(params, g, 1e-2, s1);
      adam_step(params2, g, 1e-2, s2);
    }
    CHECK(w == w2);
  }
  SECTION("shape mismatch") {
    GradientSet g{{Matrix(3, 2)}, {}};
    AdamState state;
    CHECK_THROWS_AS(adam_step(params, g, 1e-3, state), InvalidInput);
  }
  SECTION("frozen tensors are skipped") {
    GradientSet g{{Matrix(2, 2, 1.0)}, {}};
    AdamState state;
    const std::vector<bool> frozen{true};
    adam_step(params, g, 1e-3, state, frozen);
    CHECK(w == before);
  }
}

TEST_CASE("grad_check on a linear model is exact", "[nn][gradcheck]") {
  // loss = <W x, d>; dL/dW = d x^T
  Rng rng(17);
  Matrix w(4, 5);
  for (double& v : w.values()) v = rng.uniform(-1, 1);
  const auto x = random_vector(rng, 5, 1.0);
  const auto d = random_vector(rng, 4, 1.0);
  auto loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) total += w(i, j) * x[j] * d[i];
    return total;
  };
  GradientSet g{{Matrix(4, 5)}, {}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) g.tensors[0](i, j) = d[i] * x[j];
  std::vector<Matrix*> params{&w};
  CHECK(grad_check(loss, params, g) < 1e-8);
  CHECK_THROWS_AS(grad_check(loss, params, g, {.epsilon = 0.1}), InvalidInput);
}

TEST_CASE("grad_check on MLP + softmax_t + cross_entropy", "[nn][gradcheck]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto net = small_mlp(seed, 8, 10, 4);
    Rng rng(seed * 31);
    const auto x = random_vector(rng, 8, 1.0);
    const auto target = softmax(random_vector(rng, 4, 2.0));
    const Temperature t(2.0);
    auto loss = [&] { return cross_entropy(target, softmax_t(net.forward(x, false), t)); };
    const auto logits = net.forward(x, true);
    const auto q = softmax_t(logits, t);
    std::vector<double> upstream(4);
    for (std::size_t i = 0; i < 4; ++i) upstream[i] = (q[i] - target[i]) / t.value();
    const auto analytic = net.backward(upstream);
    auto params = net.parameters();
    INFO("seed " << seed);
    CHECK(grad_check(loss, params, analytic, {.seed = seed}) < 1e-4);
  }
}

TEST_CASE("grad_check detects a corrupted gradient", "[nn][gradcheck]") {
  auto net = small_mlp(2, 4, 5, 3);
  Rng rng(8);
  const auto x = random_vector(rng, 4, 1.0);
  const auto direction = random_vector(rng, 3, 1.0);
  auto loss = [&] {
    const auto y = net.forward(x, false);
    return std::inner_product(y.begin(), y.end(), direction.begin(), 0.0);
  };
  net.forward(x, true);
  auto analytic = net.backward(direction);
  // Output-layer bias gradient equals the direction, which is never zero.
  analytic.tensors[3].data()[1] *= 2.0;
  auto params = net.parameters();
  CHECK(grad_check(loss, params, analytic) > 0.1);
}

TEST_CASE("nn-core is bit-deterministic given a seed", "[nn][determinism]") {
  auto run = [] {
    const std::vector<std::size_t> dims{6, 5, 3};
    Rng init(42);
    auto net = LayerStack::glorot(dims, Activation::kRelu, 0.2, init);
    Rng rng(43);
    AdamState state;
    for (int step = 0; step < 20; ++step) {
      const auto x = random_vector(rng, 6, 1.0);
      const auto y = net.forward(x, true, &rng);
      auto g = net.zero_gradients();
      net.backward_accumulate(y, g.tensors, 1.0);
      auto params = net.parameters();
      adam_step(params, g, 1e-2, state);
    }
    return net;
  };
  CHECK(run() == run());
}
