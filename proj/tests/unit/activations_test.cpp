// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/activations.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "core/error.hpp"
#include "oracles.hpp"

namespace agrad {
namespace {

using K = ActivationKind;

TEST(Activations, PointValues) {
  EXPECT_EQ(act_eval(ActivationSpec::of(K::kRelu), -2.0), 0.0);
  EXPECT_NEAR(act_eval(ActivationSpec::of(K::kGelu), 1.0), 0.84134, 1e-4);
  EXPECT_NEAR(act_eval(ActivationSpec::interp_relu_gelu(0.5), -1.0), -0.07932, 1e-4);
  EXPECT_NEAR(act_eval(ActivationSpec::of(K::kGelu), -1.0), oracle::gelu(-1.0), 1e-14);
}

TEST(Activations, DerivativesAtZero) {
  EXPECT_EQ(act_derivative(ActivationSpec::of(K::kRelu), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(act_derivative(ActivationSpec::of(K::kGelu), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(act_derivative(ActivationSpec::of(K::kSilu), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(act_derivative(ActivationSpec::leaky_relu(0.2), 0.0), 0.2);
}

TEST(Activations, MatchErfOracle) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = u(gen);
    EXPECT_NEAR(gelu(x), oracle::gelu(x), 1e-13) << x;
    EXPECT_NEAR(gelu_derivative(x), oracle::gelu_derivative(x), 1e-13) << x;
    EXPECT_NEAR(silu(x), oracle::silu(x), 1e-13) << x;
    EXPECT_NEAR(silu_derivative(x), oracle::silu_derivative(x), 1e-13) << x;
  }
}

TEST(Activations, InterpolationEndpoints) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  const auto relu0 = ActivationSpec::interp_relu_gelu(0.0);
  const auto gelu1 = ActivationSpec::interp_relu_gelu(1.0);
  const auto silu1 = ActivationSpec::interp_relu_silu(1.0);
  for (int k = 0; k < 100000; ++k) {
    const double x = u(gen);
    ASSERT_EQ(act_eval(relu0, x), relu(x));
    ASSERT_NEAR(act_eval(gelu1, x), gelu(x), 1e-15);
    ASSERT_NEAR(act_eval(silu1, x), silu(x), 1e-15);
  }
}

TEST(Activations, DerivativeMatchesCentralDifference) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const ActivationSpec specs[] = {
      ActivationSpec::of(K::kRelu),         ActivationSpec::leaky_relu(0.1), ActivationSpec::of(K::kGelu),
      ActivationSpec::of(K::kSilu),         ActivationSpec::scaled_gelu(3.0), ActivationSpec::interp_relu_gelu(0.4),
      ActivationSpec::interp_relu_silu(0.7), ActivationSpec::of(K::kIdentity)};
  for (const auto& spec : specs) {
    for (int k = 0; k < 200; ++k) {
      const double x = u(gen);
      if (std::fabs(x) < 1e-2) continue;  // kink guard band
      const double numeric = oracle::derivative([&](double t) { return act_eval(spec, t); }, x, 1e-4);
      const double analytic = act_derivative(spec, x);
      EXPECT_LE(std::fabs(analytic - numeric), 1e-5 * std::max(1.0, std::fabs(analytic)))
          << to_string(spec.kind) << " at " << x;
    }
  }
}

TEST(Activations, GeluBoundedOnUnitInterval) {
  for (double x = -1.0; x <= 1.0; x += 1e-3) {
    const double y = act_eval(ActivationSpec::of(K::kGelu), x);
    EXPECT_GE(y, -0.17);
    EXPECT_LE(y, 0.85);
  }
}

TEST(Activations, ScaledGeluApproachesRelu) {
  const auto spec = ActivationSpec::scaled_gelu(1e4);
  for (double x = -2.0; x <= 2.0; x += 0.01) {
    if (std::fabs(x) < 0.1) continue;
    EXPECT_NEAR(act_eval(spec, x), relu(x), 1e-6) << x;
  }
}

TEST(Activations, ScaledGeluDerivativeCarriesChainFactor) {
  const double s = 2.5;
  const double x = 0.3;
  const double expected = oracle::derivative([&](double t) { return t * oracle::phi(s * t); }, x);
  EXPECT_NEAR(act_derivative(ActivationSpec::scaled_gelu(s), x), expected, 1e-9);
}

TEST(Gsd, Identities) {
  EXPECT_NEAR(gsd(ActivationSpec::of(K::kRelu), 0.0), 1.0, 1e-6);
  EXPECT_NEAR(gsd(ActivationSpec::of(K::kGelu), 0.0), 0.0, 1e-6);
  EXPECT_NEAR(gsd(ActivationSpec::of(K::kSilu), 0.0), 0.0, 1e-6);
  for (int k = 0; k <= 10; ++k) {
    const double i = k / 10.0;
    EXPECT_NEAR(gsd(ActivationSpec::interp_relu_gelu(i), 0.0), 1.0 - i, 1e-6) << i;
    EXPECT_NEAR(gsd(ActivationSpec::interp_relu_silu(i), 0.0), 1.0 - i, 1e-6) << i;
  }
  for (double alpha : {0.0, 0.01, 0.1, 0.3, 0.9}) {
    EXPECT_NEAR(gsd(ActivationSpec::leaky_relu(alpha), 0.0), 1.0 - alpha, 1e-6) << alpha;
  }
}

TEST(Gsd, SmoothAwayFromKink) {
  EXPECT_NEAR(gsd(ActivationSpec::of(K::kRelu), 0.5), 0.0, 1e-9);
  EXPECT_NEAR(gsd(ActivationSpec::interp_relu_gelu(0.2), -0.7), 0.0, 1e-6);
}

TEST(Gsd, RejectsBadEps) { EXPECT_THROW(gsd(ActivationSpec::of(K::kRelu), 0.0, 0.0), ConfigError); }

TEST(Glu, PointValues) {
  GluParams p{Tensor({1, 1}, {1.0}), Tensor({1, 1}, {1.0}), Tensor({1}, {0.0}), Tensor({1}, {0.0})};
  EXPECT_DOUBLE_EQ(glu_eval(ActivationSpec::of(K::kReglu), Tensor({1, 1}, {2.0}), p)[0], 4.0);
  EXPECT_DOUBLE_EQ(glu_eval(ActivationSpec::of(K::kReglu), Tensor({1, 1}, {-2.0}), p)[0], 0.0);
  EXPECT_NEAR(glu_eval(ActivationSpec::of(K::kGeglu), Tensor({1, 1}, {1.0}), p)[0], 0.84134, 1e-4);
}

TEST(Glu, InterpolationBlendsGate) {
  GluParams p{Tensor({2, 1}, {0.5, -1.0}), Tensor({2, 1}, {1.0, 2.0}), Tensor({1}, {0.1}), Tensor({1}, {-0.2})};
  const Tensor x({3, 2}, {0.3, 0.4, -1.0, 0.2, 0.7, -0.5});
  ActivationSpec mid{K::kInterpRegluGeglu, 1.0, 0.25};
  const Tensor got = glu_eval(mid, x, p);
  for (std::size_t r = 0; r < 3; ++r) {
    const double g = x[2 * r] * 0.5 - x[2 * r + 1] + 0.1;
    const double l = x[2 * r] * 1.0 + x[2 * r + 1] * 2.0 - 0.2;
    const double gate = std::max(0.0, g) + 0.25 * (oracle::gelu(g) - std::max(0.0, g));
    EXPECT_NEAR(got[r], gate * l, 1e-12);
  }
  ActivationSpec zero{K::kInterpRegluGeglu, 1.0, 0.0};
  EXPECT_EQ(glu_eval(zero, x, p), glu_eval(ActivationSpec::of(K::kReglu), x, p));
}

TEST(Glu, ShapeMismatch) {
  GluParams p{Tensor({2, 1}, 1.0), Tensor({2, 1}, 1.0), Tensor({1}, 0.0), Tensor({1}, 0.0)};
  EXPECT_THROW(glu_eval(ActivationSpec::of(K::kReglu), Tensor({1, 3}, 1.0), p), ShapeError);
  EXPECT_THROW(act_eval(ActivationSpec::of(K::kReglu), 1.0), ConfigError);
}

TEST(ActivationSpec, Validation) {
  EXPECT_THROW(ActivationSpec::interp_relu_gelu(1.5).validate(), ConfigError);
  EXPECT_THROW(ActivationSpec::scaled_gelu(0.0).validate(), ConfigError);
  EXPECT_THROW(ActivationSpec::leaky_relu(1.0).validate(), ConfigError);
  try {
    ActivationSpec::interp_relu_gelu(1.5).validate();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "activation.i");
  }
  EXPECT_EQ(parse_activation_kind("interp-relu-gelu"), K::kInterpReluGelu);
  EXPECT_FALSE(parse_activation_kind("swish").has_value());
}

}  // namespace
}  // namespace agrad
