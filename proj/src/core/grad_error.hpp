// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "core/activations.hpp"
#include "core/rng.hpp"

namespace agrad {

/// How noise enters the single-input, single-weight product.
enum class ProductMode {
  /// Closed form with one shared epsilon:
  ///   sign(xi xw) qi qw / p^2 + (eps / p) sqrt(qi^2 + qw^2) + eps^2
  /// with qi = ceil(|xi p| - 0.5), qw likewise and p = 2^bits.
  kClosedForm,
  /// Independent noise on each quantized operand, then multiply.
  kDirect,
};

double noisy_product(double x_i, double x_w, int bits, double sigma, RngStream& rng,
                     ProductMode mode = ProductMode::kClosedForm);

/// Mean absolute deviation |f'(noisy product) - f'(x_i x_w)| per grid cell.
struct ErrorSurface {
  std::vector<double> xi_grid;
  std::vector<double> xw_grid;
  std::vector<double> values;  // row-major, rows follow xi_grid
  ActivationSpec activation;
  int bits = 8;
  double ep = 0.0;
  double sigma = 0.0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  ProductMode product = ProductMode::kClosedForm;
  std::string statistic = "mean-absolute-deviation";

  double at(std::size_t row, std::size_t col) const { return values[row * xw_grid.size() + col]; }
  double mean() const;
  double median() const;
  double max() const;
};

/// Cell (r, c) draws from RngStream(seed, r * grid.size() + c), so surfaces
/// built with the same seed see identical noise whatever the activation.
ErrorSurface gradient_error_surface(const ActivationSpec& spec, int bits, double ep, const std::vector<double>& grid,
                                    std::size_t trials, std::uint64_t seed,
                                    ProductMode mode = ProductMode::kClosedForm);

std::vector<ErrorSurface> interpolation_error_sweep(ActivationKind interp_kind, int bits, double ep,
                                                    const std::vector<double>& i_values,
                                                    const std::vector<double>& grid, std::size_t trials,
                                                    std::uint64_t seed, ProductMode mode = ProductMode::kClosedForm);

/// Mini-batch mean of f'(x + eps_k) over n draws, next to the true
/// derivative f'(x).
struct AccumRecord {
  double x = 0.0;
  std::size_t n = 0;
  double sigma = 0.0;
  double mean_error = 0.0;
  double reference = 0.0;
  ActivationSpec activation;

  double deviation() const { return mean_error - reference; }
};

AccumRecord accumulated_error(const ActivationSpec& spec, double x, std::size_t n, double sigma, RngStream& rng);

/// `points` evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t points);

void write_surface_csv(const std::string& path, const ErrorSurface& surface);
void write_surface_metadata(const std::string& path, const ErrorSurface& surface);

}  // namespace agrad
