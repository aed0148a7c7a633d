// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace oracle {
namespace {

constexpr long double kPi = 3.141592653589793238462643383279502884L;

long double erf_series(long double x) {
  // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-22L * std::fabs(sum)) break;
  }
  return 2.0L / std::sqrt(kPi) * sum;
}

long double erfc_fraction(long double x) {
  // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  const long double tiny = 1e-300L;
  long double f = x;
  long double c = x;
  long double d = 0.0L;
  for (int n = 1; n < 500; ++n) {
    const long double a = n / 2.0L;
    d = x + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0L / d;
    const long double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0L) < 1e-20L) break;
  }
  return std::exp(-x * x) / std::sqrt(kPi) / f;
}

}  // namespace

long double erf(long double x) {
  if (x < 0) return -erf(-x);
  if (x < 3.0L) return erf_series(x);
  return 1.0L - erfc_fraction(x);
}

long double erfc(long double x) {
  if (x < 3.0L) return 1.0L - erf(x);
  return erfc_fraction(x);
}

long double phi(long double x) { return 0.5L * (1.0L + erf(x / std::sqrt(2.0L))); }

double gelu(double x) { return static_cast<double>(x * phi(x)); }

double gelu_derivative(double x) {
  const long double density = std::exp(-0.5L * x * x) / std::sqrt(2.0L * kPi);
  return static_cast<double>(phi(x) + x * density);
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s + x * s * (1.0 - s);
}

double derivative(const std::function<double(double)>& f, double x, double h) {
  return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

double nearest_grid_point(double x, int bits) {
  const double step = std::ldexp(1.0, -bits);
  const double base = std::floor(x / step) * step;
  double best = base;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int k = -1; k <= 2; ++k) {
    const double candidate = base + k * step;
    const double dist = std::fabs(candidate - x);
    // Ties go to the candidate of smaller magnitude.
    if (dist < best_dist || (dist == best_dist && std::fabs(candidate) < std::fabs(best))) {
      best = candidate;
      best_dist = dist;
    }
  }
  return best == 0.0 ? 0.0 : best;
}

double monte_carlo_ep(int bits, double sigma, std::size_t trials, std::uint64_t seed) {
  const double steps = std::ldexp(1.0, bits) - 1.0;
  const long interior = static_cast<long>(steps) - 1;  // levels 1 .. steps-1
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::size_t changed = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const long level = 1 + static_cast<long>(t % static_cast<std::size_t>(interior));
    const double value = level / steps + noise(engine);
    const long requantized = std::lround(value * steps);
    if (requantized != level) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(trials);
}

double logistic_probe(const std::vector<std::vector<double>>& train_x, const std::vector<int>& train_y,
                      const std::vector<std::vector<double>>& test_x, const std::vector<int>& test_y,
                      std::size_t classes, std::size_t iterations, double lr) {
  const std::size_t d = train_x.front().size();
  const std::size_t n = train_x.size();
  std::vector<double> w(classes * (d + 1), 0.0);
  std::vector<double> grad(w.size());
  std::vector<double> p(classes);

  auto scores = [&](const std::vector<double>& x) {
    for (std::size_t c = 0; c < classes; ++c) {
      double s = w[c * (d + 1) + d];
      for (std::size_t j = 0; j < d; ++j) s += w[c * (d + 1) + j] * x[j];
      p[c] = s;
    }
  };

  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      scores(train_x[k]);
      const double m = *std::max_element(p.begin(), p.end());
      double z = 0.0;
      for (double& v : p) z += (v = std::exp(v - m));
      for (std::size_t c = 0; c < classes; ++c) {
        const double g = p[c] / z - (static_cast<int>(c) == train_y[k] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[c * (d + 1) + j] += g * train_x[k][j];
        grad[c * (d + 1) + d] += g;
      }
    }
    for (std::size_t q = 0; q < w.size(); ++q) w[q] -= lr * grad[q] / static_cast<double>(n);
  }

  std::size_t correct = 0;
  for (std::size_t k = 0; k < test_x.size(); ++k) {
    scores(test_x[k]);
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best == test_y[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_x.size());
}

}  // namespace oracle
