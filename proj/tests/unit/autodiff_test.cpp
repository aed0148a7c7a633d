// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/autodiff.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "core/error.hpp"

namespace agrad {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(gen);
  return t;
}

TEST(Forward, Identity) {
  Graph g;
  const auto x = g.input("x");
  g.set_output("y", g.identity(x));
  const auto out = g.forward({{"x", Tensor::vector({1.0, 2.0})}});
  EXPECT_EQ(out.at("y"), Tensor::vector({1.0, 2.0}));
}

TEST(Forward, MatMul) {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.parameter("w", Tensor({2, 1}, {3.0, 4.0}));
  g.set_output("y", g.matmul(x, w));
  const auto out = g.forward({{"x", Tensor({1, 2}, {1.0, 2.0})}});
  EXPECT_EQ(out.at("y"), Tensor({1, 1}, {11.0}));
}

TEST(Forward, Gelu) {
  Graph g;
  const auto x = g.input("x");
  g.set_output("y", g.activation(x, ActivationSpec::of(ActivationKind::kGelu)));
  EXPECT_NEAR(g.forward({{"x", Tensor::vector({1.0})}}).at("y")[0], 0.8413, 1e-4);
}

TEST(Forward, Errors) {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.parameter("w", Tensor({3, 1}, 1.0));
  g.set_output("y", g.matmul(x, w));
  EXPECT_THROW(g.forward({}), StateError);
  try {
    g.forward({{"x", Tensor({1, 2}, 1.0)}});
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos) << e.what();
  }
}

TEST(Backward, Examples) {
  {
    Graph g;
    const auto x = g.input("x");
    const auto w = g.parameter("w", Tensor::scalar(0.7));
    const auto loss = g.sum(g.mul(w, x));
    g.forward({{"x", Tensor::scalar(2.0)}});
    EXPECT_DOUBLE_EQ(g.backward(loss).at("w")[0], 2.0);
  }
  {
    Graph g;
    const auto x = g.input("x");
    const auto loss = g.sum(g.activation(x, ActivationSpec::of(ActivationKind::kRelu)));
    g.forward({{"x", Tensor::scalar(-1.0)}});
    EXPECT_EQ(g.backward(loss).at("x")[0], 0.0);
  }
  {
    Graph g;
    const auto x = g.input("x");
    const auto loss = g.sum(g.activation(x, ActivationSpec::of(ActivationKind::kSilu)));
    g.forward({{"x", Tensor::scalar(0.0)}});
    EXPECT_DOUBLE_EQ(g.backward(loss).at("x")[0], 0.5);
  }
}

TEST(Backward, Errors) {
  Graph g;
  const auto x = g.input("x");
  const auto y = g.scale(x, 2.0);
  const auto loss = g.sum(y);
  EXPECT_THROW(g.backward(loss), StateError);
  g.forward({{"x", Tensor::vector({1.0, 2.0})}});
  EXPECT_THROW(g.backward(y), ShapeError);
}

TEST(Backward, LinearInUpstreamGradient) {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.parameter("w", random_tensor({4, 3}, 1));
  const auto b = g.parameter("b", random_tensor({3}, 2));
  const auto h = g.activation(g.add(g.matmul(x, w), b), ActivationSpec::of(ActivationKind::kGelu));
  const auto loss = g.sum(h);
  const auto scaled = g.scale(loss, 3.5);
  const Bindings in{{"x", random_tensor({5, 4}, 3)}};
  g.forward(in);
  const auto base = g.backward(loss);
  g.forward(in);
  const auto times = g.backward(scaled);
  for (const char* name : {"w", "b", "x"}) {
    const Tensor& a = base.at(name);
    const Tensor& c = times.at(name);
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_NEAR(c[k], 3.5 * a[k], 1e-12 * std::max(1.0, std::fabs(c[k]))) << name;
  }
}

TEST(Forward, DeterministicNoise) {
  Graph g;
  const auto x = g.input("x");
  g.set_output("y", g.quant_noise(x, QuantNoiseSpec::from_ep(4, 0.5), 7));
  const Bindings in{{"x", random_tensor({64}, 4)}};
  ForwardOptions opt{.noise_seed = 42};
  const Tensor first = g.forward(in, opt).at("y");
  EXPECT_EQ(g.forward(in, opt).at("y"), first);
  opt.noise_seed = 43;
  EXPECT_NE(g.forward(in, opt).at("y"), first);
  opt.noise = false;
  const Tensor clean = g.forward(in, opt).at("y");
  for (std::size_t k = 0; k < clean.size(); ++k) EXPECT_EQ(clean[k], reduce_precision(in.at("x")[k], 4));
}

TEST(StraightThrough, IdentityInsideClampZeroOutside) {
  Graph g;
  const auto x = g.input("x");
  const auto q = g.quant_noise(x, QuantNoiseSpec::from_ep(3, 0.6), 1);
  EXPECT_TRUE(g.node(q).straight_through());
  const auto loss = g.sum(g.mul(q, g.input("c")));
  g.forward({{"x", Tensor::vector({-2.0, -0.3, 0.4, 1.5})}, {"c", Tensor::vector({1.0, 2.0, 3.0, 4.0})}});
  EXPECT_EQ(g.backward(loss).at("x"), Tensor::vector({0.0, 2.0, 3.0, 0.0}));
}

// Noise layers with sigma = 0 and 16 bits are gradient-transparent.
TEST(StraightThrough, TransparentPipelineMatchesPlainGraph) {
  auto build = [](bool with_pipelines) {
    Graph g;
    auto x = g.input("x");
    const auto spec = QuantNoiseSpec::from_sigma(16, 0.0);
    if (with_pipelines) x = g.quant_noise(x, spec, 1);
    auto w = g.parameter("w", random_tensor({3, 4}, 5, -0.3, 0.3));
    auto b = g.parameter("b", random_tensor({4}, 6, -0.1, 0.1));
    auto h = g.add(g.matmul(x, w), b);
    if (with_pipelines) h = g.quant_noise(h, spec, 2);
    h = g.activation(h, ActivationSpec::of(ActivationKind::kGelu));
    auto loss = g.softmax_cross_entropy(h, g.input("y"));
    g.set_output("loss", loss);
    return std::pair{std::move(g), loss};
  };
  auto [plain, lp] = build(false);
  auto [noisy, ln] = build(true);
  Bindings in{{"x", random_tensor({6, 3}, 7, -0.9, 0.9)}, {"y", Tensor({6}, {0, 1, 2, 3, 0, 1})}};
  plain.forward(in);
  noisy.forward(in);
  const auto ga = plain.backward(lp);
  const auto gb = noisy.backward(ln);
  for (const char* name : {"w", "b"}) {
    for (std::size_t k = 0; k < ga.at(name).size(); ++k) EXPECT_NEAR(ga.at(name)[k], gb.at(name)[k], 1e-4) << name;
  }
}

class FiniteDiff : public ::testing::Test {
 protected:
  static constexpr double kTol = 1e-4;
};

TEST_F(FiniteDiff, LinearLayerIsExact) {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.parameter("w", random_tensor({3, 2}, 8));
  const auto loss = g.sum(g.matmul(x, w));
  const double err = finite_diff_check(g, loss, "w", random_tensor({3, 2}, 9), 1e-4, {{"x", random_tensor({4, 3}, 10)}});
  EXPECT_LT(err, 1e-7);
}

TEST_F(FiniteDiff, GeluAndRelu) {
  Graph g;
  const auto x = g.input("x");
  const auto loss = g.sum(g.activation(x, ActivationSpec::of(ActivationKind::kGelu)));
  EXPECT_LT(finite_diff_check(g, loss, "x", Tensor::vector({0.7}), 1e-4), 1e-5);
  Graph r;
  const auto rx = r.input("x");
  const auto rloss = r.sum(r.activation(rx, ActivationSpec::of(ActivationKind::kRelu)));
  EXPECT_LT(finite_diff_check(r, rloss, "x", Tensor::vector({1.0}), 1e-4), 1e-7);
}

TEST_F(FiniteDiff, ConvPoolNetwork) {
  Graph g;
  const auto x = g.input("x");
  const auto w = g.parameter("w", random_tensor({3, 2, 3, 3}, 11, -0.4, 0.4));
  const auto b = g.parameter("b", random_tensor({3}, 12, -0.1, 0.1));
  auto h = g.conv2d(x, w, b, 1);
  h = g.activation(h, ActivationSpec::of(ActivationKind::kSilu));
  h = g.maxpool2(h);
  h = g.flatten(h);
  const auto v = g.parameter("v", random_tensor({3 * 2 * 2, 4}, 13, -0.3, 0.3));
  const auto logits = g.matmul(h, v);
  const auto loss = g.softmax_cross_entropy(logits, g.input("y"));
  Bindings in{{"x", random_tensor({2, 2, 5, 4}, 14)}, {"y", Tensor({2}, {1, 3})}};
  EXPECT_LT(finite_diff_check(g, loss, "w", g.parameter_value("w"), 1e-5, in), kTol);
  EXPECT_LT(finite_diff_check(g, loss, "b", g.parameter_value("b"), 1e-5, in), kTol);
  EXPECT_LT(finite_diff_check(g, loss, "v", g.parameter_value("v"), 1e-5, in), kTol);
  Bindings xs = in;
  xs.erase("x");
  EXPECT_LT(finite_diff_check(g, loss, "x", in.at("x"), 1e-5, xs), kTol);
}

TEST_F(FiniteDiff, RandomPointsEveryActivation) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const ActivationSpec specs[] = {ActivationSpec::of(ActivationKind::kRelu), ActivationSpec::leaky_relu(0.2),
                                  ActivationSpec::of(ActivationKind::kGelu), ActivationSpec::of(ActivationKind::kSilu),
                                  ActivationSpec::scaled_gelu(2.0), ActivationSpec::interp_relu_gelu(0.3),
                                  ActivationSpec::interp_relu_silu(0.6)};
  const double eps = 1e-5;
  for (const auto& spec : specs) {
    Graph g;
    const auto x = g.input("x");
    const auto loss = g.sum(g.mul(g.activation(x, spec), g.input("c")));
    Tensor point(Shape{100});
    for (double& v : point.data()) {
      do v = u(gen);
      while (std::fabs(v) < 10 * eps);
    }
    EXPECT_LT(finite_diff_check(g, loss, "x", point, eps, {{"c", random_tensor({100}, 32, 0.5, 1.5)}}), kTol)
        << to_string(spec.kind);
  }
}

TEST(Graph, Bookkeeping) {
  Graph g;
  const auto x = g.input("x");
  g.parameter("w", Tensor::scalar(1.0));
  EXPECT_THROW(g.input("x"), ConfigError);
  EXPECT_EQ(g.find("x"), x);
  EXPECT_TRUE(g.contains("w"));
  EXPECT_EQ(g.parameters().size(), 1u);
  EXPECT_THROW(g.parameter_value("x"), ConfigError);
  EXPECT_THROW(g.identity(99), ShapeError);
}

}  // namespace
}  // namespace agrad
