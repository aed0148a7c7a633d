// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "core/activations.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace agrad {

enum class Stage { kClamp, kReducePrecision, kNoise };

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

/// Quantized-noise channel description. Exactly one of `sigma` and
/// `target_ep` is given at construction; resolved() fills in the other one.
struct QuantNoiseSpec {
  int bits = 8;
  std::optional<double> sigma;
  std::optional<double> target_ep;
  double clamp_lo = -1.0;
  double clamp_hi = 1.0;
  std::vector<Stage> stages{Stage::kClamp, Stage::kReducePrecision, Stage::kNoise};

  static QuantNoiseSpec from_sigma(int bits, double sigma);
  static QuantNoiseSpec from_ep(int bits, double ep);

  bool has_stage(Stage stage) const noexcept;
  bool is_resolved() const noexcept { return sigma.has_value() && target_ep.has_value(); }
  /// Throws ConfigError naming the offending field (prefixed by `path`).
  void validate(std::string_view path = "noise") const;
  /// Copy with both sigma and target_ep populated and consistent.
  QuantNoiseSpec resolved() const;
  /// Noise standard deviation; resolves on the fly when needed.
  double noise_sigma() const;

  friend bool operator==(const QuantNoiseSpec&, const QuantNoiseSpec&) = default;
};

/// Round-to-nearest onto the 2^-bits grid:
///   sign(x) * ceil(|2^bits * x| - 0.5) / 2^bits
/// Exact half steps round toward zero.
double reduce_precision(double x, int bits) noexcept;
Tensor reduce_precision(const Tensor& x, int bits);

/// Same rounding rule on an arbitrary grid with `levels` steps per unit.
double quantize_to_levels(double x, double levels) noexcept;

Tensor clamp(const Tensor& x, double lo, double hi);
Tensor gaussian_noise(const Tensor& x, double sigma, RngStream& rng);

/// Probability that a b-bit sample changes level under N(0, sigma^2) noise:
///   1 - erf(1 / (2 sqrt(2) sigma (2^b - 1)))
double error_probability(int bits, double sigma);
/// Inverse of error_probability in sigma, by bisection.
double sigma_from_ep(int bits, double ep);
/// Spacing between adjacent levels of the b-bit converter the EP formula
/// describes: 1 / (2^b - 1).
double converter_step(int bits);

/// Applies spec.stages left to right. Requires a spec with a known sigma.
Tensor pipeline(const Tensor& x, const QuantNoiseSpec& spec, RngStream& rng);
/// In-place variant used by the autodiff graph. When `noise` is false the
/// Gaussian stage is skipped.
void pipeline_inplace(std::span<double> values, const QuantNoiseSpec& spec, double sigma, RngStream& rng,
                      bool noise = true);

/// Number of bits the derivative of `act` resolves on the quantized inputs
/// k * 2^-bits in [-window, window]. The derivative is sampled on that grid
/// and its outputs quantized to the same grid; the result is
///   log2(1 + range / coarsest_step)
/// where range is the spread of the quantized derivative values and
/// coarsest_step the largest jump between neighbouring grid inputs. A
/// constant derivative gives 0.
double effective_bit_precision(const ActivationSpec& act, int bits, double window);

}  // namespace agrad
