// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/activations.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "core/error.hpp"

namespace agrad {
namespace {

constexpr std::array<std::pair<ActivationKind, std::string_view>, 11> kNames{{
    {ActivationKind::kRelu, "relu"},
    {ActivationKind::kLeakyRelu, "leaky-relu"},
    {ActivationKind::kGelu, "gelu"},
    {ActivationKind::kSilu, "silu"},
    {ActivationKind::kScaledGelu, "scaled-gelu"},
    {ActivationKind::kInterpReluGelu, "interp-relu-gelu"},
    {ActivationKind::kInterpReluSilu, "interp-relu-silu"},
    {ActivationKind::kReglu, "reglu"},
    {ActivationKind::kGeglu, "geglu"},
    {ActivationKind::kInterpRegluGeglu, "interp-reglu-geglu"},
    {ActivationKind::kIdentity, "identity"},
}};

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// rectified + i * (smooth - rectified)
double blend(double rectified, double smooth, double i) noexcept { return rectified + i * (smooth - rectified); }

void reject_glu(const ActivationSpec& spec) {
  if (spec.is_glu())
    throw ConfigError("gated kind '" + std::string(to_string(spec.kind)) + "' needs glu_eval", "activation.kind");
}

}  // namespace

std::string_view to_string(ActivationKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ActivationKind> parse_activation_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

bool ActivationSpec::is_glu() const noexcept {
  return kind == ActivationKind::kReglu || kind == ActivationKind::kGeglu ||
         kind == ActivationKind::kInterpRegluGeglu;
}

bool ActivationSpec::is_interp() const noexcept {
  return kind == ActivationKind::kInterpReluGelu || kind == ActivationKind::kInterpReluSilu ||
         kind == ActivationKind::kInterpRegluGeglu;
}

void ActivationSpec::validate() const {
  if (!(i >= 0.0 && i <= 1.0)) throw ConfigError("interpolation factor must lie in [0, 1]", "activation.i");
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("scaling factor must be positive", "activation.s");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("negative slope must lie in [0, 1)", "activation.alpha");
}

double relu(double x) noexcept { return x > 0 ? x : 0.0; }
double relu_derivative(double x) noexcept { return x > 0 ? 1.0 : 0.0; }

// Phi(z) as erfc(-z / sqrt2) / 2: no cancellation in the left tail.
double gelu(double x, double s) noexcept { return x * 0.5 * std::erfc(-s * x * kInvSqrt2); }

double gelu_derivative(double x, double s) noexcept {
  const double sx = s * x;
  return 0.5 * std::erfc(-sx * kInvSqrt2) + sx * kInvSqrt2Pi * std::exp(-0.5 * sx * sx);
}

double silu(double x) noexcept { return x * sigmoid(x); }

double silu_derivative(double x) noexcept {
  // sigma(x) * (1 + x * (1 - sigma(x))), algebraically equal to the
  // (1 + e^-x + x e^-x) / (1 + e^-x)^2 form but free of overflow.
  const double sg = sigmoid(x);
  return sg * (1.0 + x * (1.0 - sg));
}

double act_eval(const ActivationSpec& spec, double x) {
  switch (spec.kind) {
    case ActivationKind::kRelu:
      return relu(x);
    case ActivationKind::kLeakyRelu:
      return x > 0 ? x : spec.alpha * x;
    case ActivationKind::kGelu:
      return gelu(x);
    case ActivationKind::kSilu:
      return silu(x);
    case ActivationKind::kScaledGelu:
      return gelu(x, spec.s);
    case ActivationKind::kInterpReluGelu:
      return blend(relu(x), gelu(x), spec.i);
    case ActivationKind::kInterpReluSilu:
      return blend(relu(x), silu(x), spec.i);
    case ActivationKind::kIdentity:
      return x;
    default:
      reject_glu(spec);
  }
  return x;
}

double act_derivative(const ActivationSpec& spec, double x) {
  switch (spec.kind) {
    case ActivationKind::kRelu:
      return relu_derivative(x);
    case ActivationKind::kLeakyRelu:
      return x > 0 ? 1.0 : spec.alpha;
    case ActivationKind::kGelu:
      return gelu_derivative(x);
    case ActivationKind::kSilu:
      return silu_derivative(x);
    case ActivationKind::kScaledGelu:
      return gelu_derivative(x, spec.s);
    case ActivationKind::kInterpReluGelu:
      return blend(relu_derivative(x), gelu_derivative(x), spec.i);
    case ActivationKind::kInterpReluSilu:
      return blend(relu_derivative(x), silu_derivative(x), spec.i);
    case ActivationKind::kIdentity:
      return 1.0;
    default:
      reject_glu(spec);
  }
  return 1.0;
}

Tensor act_eval(const ActivationSpec& spec, const Tensor& x) {
  reject_glu(spec);
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = act_eval(spec, x[k]);
  return out;
}

Tensor act_derivative(const ActivationSpec& spec, const Tensor& x) {
  reject_glu(spec);
  Tensor out(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = act_derivative(spec, x[k]);
  return out;
}

void GluParams::validate() const {
  if (W.rank() != 2 || V.rank() != 2) throw ShapeError("GLU weights must be matrices");
  if (!W.same_shape(V))
    throw ShapeError("GLU weights differ in shape: W " + shape_str(W.shape()) + " vs V " + shape_str(V.shape()));
  if (b.size() != W.dim(1)) throw ShapeError("GLU bias b must have " + std::to_string(W.dim(1)) + " entries");
  if (c.size() != V.dim(1)) throw ShapeError("GLU bias c must have " + std::to_string(V.dim(1)) + " entries");
}

Tensor glu_eval(const ActivationSpec& spec, const Tensor& x, const GluParams& params) {
  if (!spec.is_glu())
    throw ConfigError("'" + std::string(to_string(spec.kind)) + "' is not a gated kind", "activation.kind");
  params.validate();
  const std::size_t in = params.W.dim(0);
  const std::size_t out = params.W.dim(1);
  std::size_t rows = 1;
  if (x.rank() == 2) {
    rows = x.dim(0);
    if (x.dim(1) != in) throw ShapeError("GLU input " + shape_str(x.shape()) + " incompatible with W " + shape_str(params.W.shape()));
  } else if (x.rank() != 1 || x.size() != in) {
    throw ShapeError("GLU input " + shape_str(x.shape()) + " incompatible with W " + shape_str(params.W.shape()));
  }

  Tensor result(x.rank() == 2 ? Shape{rows, out} : Shape{out});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out; ++j) {
      double gate = params.b[j];
      double linear = params.c[j];
      for (std::size_t k = 0; k < in; ++k) {
        const double xv = x[r * in + k];
        gate += xv * params.W[k * out + j];
        linear += xv * params.V[k * out + j];
      }
      double g = 0.0;
      switch (spec.kind) {
        case ActivationKind::kReglu:
          g = relu(gate);
          break;
        case ActivationKind::kGeglu:
          g = gelu(gate);
          break;
        default:
          g = blend(relu(gate), gelu(gate), spec.i);
          break;
      }
      result[r * out + j] = g * linear;
    }
  }
  return result;
}

double gsd(const ActivationSpec& spec, double x0, double eps) {
  if (!(eps > 0)) throw ConfigError("eps must be positive", "eps");
  reject_glu(spec);
  double h = eps;
  double left = act_derivative(spec, x0 - h);
  double right = act_derivative(spec, x0 + h);
  const double floor = std::max(1.0, std::abs(x0)) * 1e-15;
  for (int step = 0; step < 40 && h > floor; ++step) {
    h /= 10.0;
    const double next_left = act_derivative(spec, x0 - h);
    const double next_right = act_derivative(spec, x0 + h);
    if (!std::isfinite(next_left) || !std::isfinite(next_right))
      throw NumericError("non-finite derivative near x0 = " + std::to_string(x0));
    const bool settled = std::abs(next_left - left) < 1e-9 && std::abs(next_right - right) < 1e-9;
    left = next_left;
    right = next_right;
    if (settled) break;
  }
  if (!std::isfinite(left) || !std::isfinite(right))
    throw NumericError("non-finite derivative near x0 = " + std::to_string(x0));
  return std::abs(left - right);
}

}  // namespace agrad
