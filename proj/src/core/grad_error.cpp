// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "core/grad_error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "core/error.hpp"
#include "core/format.hpp"
#include "core/quant_noise.hpp"

namespace agrad {
namespace {

double magnitude_level(double x, double p) { return std::ceil(std::abs(x * p) - 0.5); }

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

double noisy_product(double x_i, double x_w, int bits, double sigma, RngStream& rng, ProductMode mode) {
  if (bits < 1) throw ConfigError("bit precision must be at least 1", "bits");
  if (!(sigma >= 0)) throw ConfigError("sigma must be >= 0", "sigma");
  const double p = std::ldexp(1.0, bits);
  const double qi = magnitude_level(x_i, p);
  const double qw = magnitude_level(x_w, p);
  if (mode == ProductMode::kDirect) {
    const double a = sign(x_i) * qi / p + (sigma > 0 ? sigma * rng.normal() : 0.0);
    const double b = sign(x_w) * qw / p + (sigma > 0 ? sigma * rng.normal() : 0.0);
    return a * b;
  }
  const double eps = sigma > 0 ? sigma * rng.normal() : 0.0;
  return sign(x_i * x_w) * qi * qw / (p * p) + (eps / p) * std::sqrt(qi * qi + qw * qw) + eps * eps;
}

double ErrorSurface::mean() const {
  return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double ErrorSurface::median() const {
  if (values.empty()) return 0.0;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  return sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

double ErrorSurface::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

ErrorSurface gradient_error_surface(const ActivationSpec& spec, int bits, double ep, const std::vector<double>& grid,
                                    std::size_t trials, std::uint64_t seed, ProductMode mode) {
  spec.validate();
  if (trials == 0) throw ConfigError("must be at least 1", "analysis.trials");
  if (grid.empty()) throw ConfigError("grid must not be empty", "analysis.grid");
  for (double g : grid)
    if (!(g >= -1.0 && g <= 1.0)) throw ConfigError("grid values must lie in [-1, 1]", "analysis.grid");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("grid must be ascending", "analysis.grid");

  ErrorSurface surface;
  surface.xi_grid = grid;
  surface.xw_grid = grid;
  surface.activation = spec;
  surface.bits = bits;
  surface.ep = ep;
  surface.sigma = sigma_from_ep(bits, ep);
  surface.trials = trials;
  surface.seed = seed;
  surface.product = mode;
  surface.values.assign(grid.size() * grid.size(), 0.0);

  for (std::size_t r = 0; r < grid.size(); ++r)
    for (std::size_t c = 0; c < grid.size(); ++c) {
      RngStream rng(seed, r * grid.size() + c);
      const double reference = act_derivative(spec, grid[r] * grid[c]);
      double total = 0.0;
      for (std::size_t t = 0; t < trials; ++t) {
        const double x = noisy_product(grid[r], grid[c], bits, surface.sigma, rng, mode);
        total += std::abs(act_derivative(spec, x) - reference);
      }
      surface.values[r * grid.size() + c] = total / static_cast<double>(trials);
    }
  return surface;
}

std::vector<ErrorSurface> interpolation_error_sweep(ActivationKind interp_kind, int bits, double ep,
                                                    const std::vector<double>& i_values,
                                                    const std::vector<double>& grid, std::size_t trials,
                                                    std::uint64_t seed, ProductMode mode) {
  if (interp_kind != ActivationKind::kInterpReluGelu && interp_kind != ActivationKind::kInterpReluSilu)
    throw ConfigError("sweep needs interp-relu-gelu or interp-relu-silu", "activation.kind");
  std::vector<ErrorSurface> surfaces;
  surfaces.reserve(i_values.size());
  for (double i : i_values) {
    ActivationSpec spec{interp_kind, 1.0, i};
    surfaces.push_back(gradient_error_surface(spec, bits, ep, grid, trials, seed, mode));
  }
  return surfaces;
}

AccumRecord accumulated_error(const ActivationSpec& spec, double x, std::size_t n, double sigma, RngStream& rng) {
  spec.validate();
  if (n == 0) throw ConfigError("must be at least 1", "analysis.n");
  if (!(sigma > 0)) throw ConfigError("must be positive", "analysis.sigma");
  AccumRecord rec;
  rec.x = x;
  rec.n = n;
  rec.sigma = sigma;
  rec.activation = spec;
  rec.reference = act_derivative(spec, x);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += act_derivative(spec, x + sigma * rng.normal());
  rec.mean_error = total / static_cast<double>(n);
  if (!std::isfinite(rec.mean_error)) throw NumericError("accumulated error is not finite");
  return rec;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> out(points);
  for (std::size_t k = 0; k < points; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  out.back() = hi;
  return out;
}

void write_surface_csv(const std::string& path, const ErrorSurface& surface) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "x_i,x_w,value\n";
  for (std::size_t r = 0; r < surface.xi_grid.size(); ++r)
    for (std::size_t c = 0; c < surface.xw_grid.size(); ++c)
      out << format_real(surface.xi_grid[r]) << ',' << format_real(surface.xw_grid[c]) << ','
          << format_real(surface.at(r, c)) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_surface_metadata(const std::string& path, const ErrorSurface& surface) {
  nlohmann::json meta = {
      {"activation",
       {{"kind", to_string(surface.activation.kind)},
        {"s", surface.activation.s},
        {"i", surface.activation.i},
        {"alpha", surface.activation.alpha}}},
      {"bits", surface.bits},
      {"ep", surface.ep},
      {"sigma", surface.sigma},
      {"trials", surface.trials},
      {"seed", surface.seed},
      {"product", surface.product == ProductMode::kClosedForm ? "closed-form" : "direct"},
      {"statistic", surface.statistic},
      {"grid_points", surface.xi_grid.size()},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace agrad
