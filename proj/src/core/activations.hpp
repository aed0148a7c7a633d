// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "core/tensor.hpp"

namespace agrad {

enum class ActivationKind {
  kRelu,
  kLeakyRelu,
  kGelu,
  kSilu,
  kScaledGelu,
  kInterpReluGelu,
  kInterpReluSilu,
  kReglu,
  kGeglu,
  kInterpRegluGeglu,
  kIdentity,
};

std::string_view to_string(ActivationKind kind);
std::optional<ActivationKind> parse_activation_kind(std::string_view name);

/// Parameterized activation. `s` is only read by scaled-gelu, `i` by the
/// interpolating kinds and `alpha` by leaky-relu.
struct ActivationSpec {
  ActivationKind kind = ActivationKind::kRelu;
  double s = 1.0;
  double i = 0.0;
  double alpha = 0.01;

  static ActivationSpec of(ActivationKind kind) { return ActivationSpec{kind}; }
  static ActivationSpec interp_relu_gelu(double i) { return {ActivationKind::kInterpReluGelu, 1.0, i}; }
  static ActivationSpec interp_relu_silu(double i) { return {ActivationKind::kInterpReluSilu, 1.0, i}; }
  static ActivationSpec leaky_relu(double alpha) { return {ActivationKind::kLeakyRelu, 1.0, 0.0, alpha}; }
  static ActivationSpec scaled_gelu(double s) { return {ActivationKind::kScaledGelu, s}; }

  bool is_glu() const noexcept;
  bool is_interp() const noexcept;
  /// Throws ConfigError naming "activation.<field>" when out of range.
  void validate() const;

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

// Scalar building blocks. GELU always goes through erf; no tanh approximation.
double relu(double x) noexcept;
double relu_derivative(double x) noexcept;
double gelu(double x, double s = 1.0) noexcept;
double gelu_derivative(double x, double s = 1.0) noexcept;
double silu(double x) noexcept;
double silu_derivative(double x) noexcept;

/// Elementwise activation value. GLU kinds are rejected; see glu_eval.
double act_eval(const ActivationSpec& spec, double x);
/// Closed-form derivative. At a kink the x <= 0 branch is used.
double act_derivative(const ActivationSpec& spec, double x);

Tensor act_eval(const ActivationSpec& spec, const Tensor& x);
Tensor act_derivative(const ActivationSpec& spec, const Tensor& x);

/// Gated linear unit parameters: gate = x W + b, linear = x V + c.
struct GluParams {
  Tensor W;
  Tensor V;
  Tensor b;
  Tensor c;

  void validate() const;
};

/// gate(x W + b) * (x V + c) for x of shape [N, d] (or [d]). Only the
/// reglu, geglu and interp-reglu-geglu kinds are accepted.
Tensor glu_eval(const ActivationSpec& spec, const Tensor& x, const GluParams& params);

/// Gradient step discontinuity |f'(x0-) - f'(x0+)|. The one-sided limits are
/// approached by shrinking the offset from `eps` by a factor of ten until both
/// limits move by less than 1e-9.
double gsd(const ActivationSpec& spec, double x0, double eps = 1e-3);

}  // namespace agrad
