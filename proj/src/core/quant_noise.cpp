// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/quant_noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "core/error.hpp"

namespace agrad {
namespace {

void check_bits(int bits, std::string_view field) {
  if (bits < 1 || bits > 30) throw ConfigError("bit precision must be at least 1", std::string(field));
}

std::string join(std::string_view path, std::string_view field) {
  return path.empty() ? std::string(field) : std::string(path) + "." + std::string(field);
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kClamp:
      return "clamp";
    case Stage::kReducePrecision:
      return "reduce-precision";
    case Stage::kNoise:
      return "noise";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  if (name == "clamp") return Stage::kClamp;
  if (name == "reduce-precision") return Stage::kReducePrecision;
  if (name == "noise") return Stage::kNoise;
  return std::nullopt;
}

QuantNoiseSpec QuantNoiseSpec::from_sigma(int bits, double sigma) {
  QuantNoiseSpec spec;
  spec.bits = bits;
  spec.sigma = sigma;
  return spec;
}

QuantNoiseSpec QuantNoiseSpec::from_ep(int bits, double ep) {
  QuantNoiseSpec spec;
  spec.bits = bits;
  spec.target_ep = ep;
  return spec;
}

bool QuantNoiseSpec::has_stage(Stage stage) const noexcept {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

void QuantNoiseSpec::validate(std::string_view path) const {
  if (bits < 1 || bits > 16) throw ConfigError("must lie in [1, 16]", join(path, "bits"));
  if (!sigma && !target_ep) throw ConfigError("one of sigma or ep is required", join(path, "sigma"));
  if (sigma && (!(*sigma >= 0.0) || !std::isfinite(*sigma)))
    throw ConfigError("must be a finite value >= 0", join(path, "sigma"));
  if (target_ep && !(*target_ep >= 0.0 && *target_ep < 1.0))
    throw ConfigError("must lie in [0, 1)", join(path, "ep"));
  if (!(clamp_lo < clamp_hi)) throw ConfigError("clamp_lo must be below clamp_hi", join(path, "clamp_lo"));
  if (stages.empty()) throw ConfigError("stage order must not be empty", join(path, "stages"));
}

QuantNoiseSpec QuantNoiseSpec::resolved() const {
  QuantNoiseSpec out = *this;
  if (out.is_resolved()) return out;
  if (out.sigma) {
    out.target_ep = *out.sigma > 0 ? error_probability(bits, *out.sigma) : 0.0;
  } else if (out.target_ep) {
    out.sigma = *out.target_ep > 0 ? sigma_from_ep(bits, *out.target_ep) : 0.0;
  } else {
    throw ConfigError("one of sigma or ep is required", "noise.sigma");
  }
  return out;
}

double QuantNoiseSpec::noise_sigma() const {
  if (sigma) return *sigma;
  return resolved().sigma.value();
}

double reduce_precision(double x, int bits) noexcept {
  if (x == 0.0) return 0.0;
  const double scale = std::ldexp(1.0, bits);
  const double magnitude = std::ceil(std::abs(scale * x) - 0.5);
  return std::copysign(magnitude, x) / scale;
}

double quantize_to_levels(double x, double levels) noexcept {
  if (x == 0.0) return 0.0;
  return std::copysign(std::ceil(std::abs(levels * x) - 0.5), x) / levels;
}

Tensor reduce_precision(const Tensor& x, int bits) {
  check_bits(bits, "bits");
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = reduce_precision(x[k], bits);
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("clamp bounds require lo < hi", "clamp_lo");
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::clamp(x[k], lo, hi);
  return out;
}

Tensor gaussian_noise(const Tensor& x, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0", "sigma");
  Tensor out = x;
  if (sigma == 0.0) return out;
  for (auto& v : out.data()) v += sigma * rng.normal();
  return out;
}

double converter_step(int bits) {
  check_bits(bits, "bits");
  return 1.0 / (std::ldexp(1.0, bits) - 1.0);
}

double error_probability(int bits, double sigma) {
  check_bits(bits, "bits");
  if (!(sigma > 0.0)) throw NumericError("error probability is singular for sigma <= 0");
  return std::erfc(converter_step(bits) / (2.0 * std::numbers::sqrt2 * sigma));
}

double sigma_from_ep(int bits, double ep) {
  check_bits(bits, "bits");
  if (!(ep > 0.0 && ep < 1.0)) throw ConfigError("error probability must lie in (0, 1)", "ep");
  // erfc(z) = ep with z = step / (2 sqrt2 sigma). erfc is decreasing, and
  // erfc(0) = 1 > ep > erfc(27.3) (which underflows to zero).
  double lo = 0.0;
  double hi = 27.5;
  for (int iter = 0; iter < 200 && hi - lo > 0; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (std::erfc(mid) > ep)
      lo = mid;
    else
      hi = mid;
  }
  const double z = 0.5 * (lo + hi);
  return converter_step(bits) / (2.0 * std::numbers::sqrt2 * z);
}

void pipeline_inplace(std::span<double> values, const QuantNoiseSpec& spec, double sigma, RngStream& rng,
                      bool noise) {
  for (Stage stage : spec.stages) {
    switch (stage) {
      case Stage::kClamp:
        for (auto& v : values) v = std::clamp(v, spec.clamp_lo, spec.clamp_hi);
        break;
      case Stage::kReducePrecision:
        for (auto& v : values) v = reduce_precision(v, spec.bits);
        break;
      case Stage::kNoise:
        if (noise && sigma > 0.0)
          for (auto& v : values) v += sigma * rng.normal();
        break;
    }
  }
}

Tensor pipeline(const Tensor& x, const QuantNoiseSpec& spec, RngStream& rng) {
  if (spec.stages.empty()) throw ConfigError("stage order must not be empty", "noise.stages");
  if (!(spec.clamp_lo < spec.clamp_hi)) throw ConfigError("clamp_lo must be below clamp_hi", "noise.clamp_lo");
  if (!spec.sigma) throw ConfigError("pipeline requires a resolved spec", "noise.sigma");
  Tensor out = x;
  pipeline_inplace(out.data(), spec, *spec.sigma, rng);
  if (!out.all_finite()) throw NumericError("pipeline produced a non-finite value");
  return out;
}

double effective_bit_precision(const ActivationSpec& act, int bits, double window) {
  check_bits(bits, "bits");
  if (!(window > 0)) throw ConfigError("window must be positive", "window");
  const double scale = std::ldexp(1.0, bits);
  const auto steps = static_cast<long long>(std::floor(window * scale));
  std::vector<double> quantized;
  quantized.reserve(static_cast<std::size_t>(2 * steps + 1));
  for (long long k = -steps; k <= steps; ++k)
    quantized.push_back(reduce_precision(act_derivative(act, static_cast<double>(k) / scale), bits));

  const auto [lo, hi] = std::minmax_element(quantized.begin(), quantized.end());
  const double range = *hi - *lo;
  double coarsest = 0.0;
  for (std::size_t k = 1; k < quantized.size(); ++k)
    coarsest = std::max(coarsest, std::abs(quantized[k] - quantized[k - 1]));
  if (range == 0.0 || coarsest == 0.0) return 0.0;
  return std::log2(1.0 + range / coarsest);
}

}  // namespace agrad
