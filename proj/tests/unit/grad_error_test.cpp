// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/grad_error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "core/error.hpp"
#include "core/quant_noise.hpp"

namespace agrad {
namespace {

using K = ActivationKind;

struct Moments {
  double mean = 0, var = 0;
};

Moments sample(double xi, double xw, int bits, double sigma, ProductMode mode, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  double s = 0, sq = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = noisy_product(xi, xw, bits, sigma, rng, mode);
    s += v;
    sq += v * v;
  }
  const double mean = s / n;
  return {mean, sq / n - mean * mean};
}

TEST(NoisyProduct, NoiselessIsQuantizedProduct) {
  RngStream rng(1, 1);
  EXPECT_NEAR(noisy_product(0.5, 0.5, 8, 0.0, rng), 0.25, std::ldexp(1.0, -9));
  for (double a : {-0.73, 0.1, 0.999})
    for (double b : {-0.2, 0.41})
      EXPECT_DOUBLE_EQ(noisy_product(a, b, 6, 0.0, rng), reduce_precision(a, 6) * reduce_precision(b, 6));
}

TEST(NoisyProduct, ZeroInputIsNoiseDominated) {
  const int bits = 8;
  const double sigma = sigma_from_ep(bits, 0.5);
  const double p = std::ldexp(1.0, bits);
  RngStream a(3, 0), b(3, 0);
  for (int k = 0; k < 100; ++k) {
    const double eps = sigma * b.normal();
    const double expected = (eps / p) * std::ceil(std::fabs(0.6 * p) - 0.5) + eps * eps;
    EXPECT_DOUBLE_EQ(noisy_product(0.0, 0.6, bits, sigma, a), expected);
  }
}

TEST(NoisyProduct, MonteCarloMean) {
  const double sigma = sigma_from_ep(8, 0.5);
  const auto m = sample(0.5, 0.5, 8, sigma, ProductMode::kClosedForm, 1000000, 5);
  EXPECT_NEAR(m.mean, 0.25, 0.001);
}

// The closed form folds both operand noises into one term; independent
// per-operand noise must give matching first and second moments.
TEST(NoisyProduct, DirectModeMomentsAgree) {
  const int bits = 6;
  const double sigma = sigma_from_ep(bits, 0.5);
  const std::size_t n = 400000;
  for (auto [xi, xw] : {std::pair{0.5, 0.5}, {0.9, -0.3}, {0.05, 0.7}, {-0.6, -0.8}}) {
    const auto c = sample(xi, xw, bits, sigma, ProductMode::kClosedForm, n, 7);
    const auto d = sample(xi, xw, bits, sigma, ProductMode::kDirect, n, 8);
    const double se = std::sqrt((c.var + d.var) / n);
    EXPECT_NEAR(c.mean, d.mean, 4 * se + sigma * sigma) << xi << "," << xw;
    EXPECT_NEAR(c.var / d.var, 1.0, 0.03) << xi << "," << xw;
  }
}

TEST(Surface, IdentityIsZero) {
  const auto s = gradient_error_surface(ActivationSpec::of(K::kIdentity), 8, 0.5, linspace(-1, 1, 11), 200, 1);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(Surface, ReluConcentratesNearAxes) {
  const auto grid = linspace(-1, 1, 11);
  const auto relu = gradient_error_surface(ActivationSpec::of(K::kRelu), 8, 0.5, grid, 2000, 2);
  const auto gelu = gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, grid, 2000, 2);
  // Grid point 9 is 0.8, the nearest grid value to the 0.9 corner.
  double near = 0;
  int count = 0;
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = 0; c < 11; ++c)
      if (std::fabs(grid[r] * grid[c]) < 0.05) near += relu.at(r, c), ++count;
  near /= count;
  EXPECT_GE(near, 10 * relu.at(9, 9));
  EXPECT_LT(gelu.max() / std::max(gelu.median(), 1e-300), relu.max() / std::max(relu.median(), 1e-300));
  for (double v : relu.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Surface, SymmetricWithinMonteCarlo) {
  const auto grid = linspace(-1, 1, 11);
  const auto s = gradient_error_surface(ActivationSpec::of(K::kRelu), 8, 0.5, grid, 4000, 3);
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = r + 1; c < 11; ++c) EXPECT_NEAR(s.at(r, c), s.at(c, r), 0.04) << r << "," << c;
}

TEST(Surface, DeterministicAndErrors) {
  const auto grid = linspace(-1, 1, 5);
  const auto a = gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, grid, 100, 9);
  EXPECT_EQ(a.values, gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, grid, 100, 9).values);
  EXPECT_THROW(gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 1.5, grid, 10, 1), ConfigError);
  EXPECT_THROW(gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, grid, 0, 1), ConfigError);
  EXPECT_THROW(gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, {0.5, 2.0}, 10, 1), ConfigError);
}

TEST(InterpolationSweep, EndpointsAndOrdering) {
  const auto grid = linspace(-1, 1, 11);
  const auto sweep = interpolation_error_sweep(K::kInterpReluGelu, 8, 0.5, {0.0, 0.5, 1.0}, grid, 1000, 4);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[0].values, gradient_error_surface(ActivationSpec::of(K::kRelu), 8, 0.5, grid, 1000, 4).values);
  EXPECT_EQ(sweep[2].values, gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, grid, 1000, 4).values);
  EXPECT_GT(sweep[0].mean(), sweep[1].mean());
  EXPECT_GT(sweep[1].mean(), sweep[2].mean());
  EXPECT_THROW(interpolation_error_sweep(K::kGelu, 8, 0.5, {0.0}, grid, 10, 1), ConfigError);
}

TEST(Accumulated, LimitsAtZero) {
  RngStream rng(10, 0);
  const auto g = accumulated_error(ActivationSpec::of(K::kGelu), 0.0, 1000000, 0.01, rng);
  EXPECT_NEAR(g.mean_error, 0.5, 0.003);
  EXPECT_DOUBLE_EQ(g.reference, 0.5);
  const auto r = accumulated_error(ActivationSpec::of(K::kRelu), 1e-9, 1000000, 0.01, rng);
  EXPECT_NEAR(r.mean_error, 0.5, 0.003);
  EXPECT_EQ(r.reference, 1.0);
  EXPECT_NEAR(r.deviation(), -0.5, 0.005);
  const auto far = accumulated_error(ActivationSpec::of(K::kRelu), 0.5, 1000000, 0.01, rng);
  EXPECT_NEAR(far.mean_error, 1.0, 0.002);
  EXPECT_THROW(accumulated_error(ActivationSpec::of(K::kRelu), 0.0, 0, 0.01, rng), ConfigError);
  EXPECT_THROW(accumulated_error(ActivationSpec::of(K::kRelu), 0.0, 10, 0.0, rng), ConfigError);
}

// Deviation from 0.5 shrinks inside 3-sigma-of-mean bands as n grows.
TEST(Accumulated, ConvergesWithBatchSize) {
  for (double x : {-1e-9, 1e-9}) {
    for (std::size_t n : {100u, 10000u, 1000000u}) {
      RngStream rng(11, n);
      const double band = 3.0 * 0.5 / std::sqrt(static_cast<double>(n));
      EXPECT_NEAR(accumulated_error(ActivationSpec::of(K::kRelu), x, n, 0.01, rng).mean_error, 0.5, band);
      EXPECT_NEAR(accumulated_error(ActivationSpec::of(K::kGelu), x, n, 0.01, rng).mean_error, 0.5, band);
    }
  }
}

TEST(SurfaceIo, CsvAndMetadata) {
  const auto dir = std::filesystem::temp_directory_path() / "agrad_surface_io";
  std::filesystem::create_directories(dir);
  const auto s = gradient_error_surface(ActivationSpec::of(K::kGelu), 8, 0.5, linspace(-1, 1, 11), 10, 1);
  write_surface_csv((dir / "s.csv").string(), s);
  write_surface_metadata((dir / "s.json").string(), s);
  std::ifstream csv(dir / "s.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "x_i,x_w,value");
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 121u);
  std::ifstream meta(dir / "s.json");
  const auto j = nlohmann::json::parse(meta);
  EXPECT_EQ(j.at("statistic"), "mean-absolute-deviation");
  EXPECT_EQ(j.at("trials"), 10);
  EXPECT_EQ(j.at("activation").at("kind"), "gelu");
  EXPECT_THROW(write_surface_csv((dir / "missing" / "x.csv").string(), s), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace agrad
