// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reference computations written without calling the library under test.
// Each one takes the slow, obvious route so it can check the fast one.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// erf by Maclaurin series (|x| < 3) or Lentz continued fraction for erfc,
/// evaluated in long double.
long double erf(long double x);
long double erfc(long double x);

/// Standard normal CDF through the erf oracle.
long double phi(long double x);

double gelu(double x);
double gelu_derivative(double x);
double silu(double x);
double silu_derivative(double x);

/// Fourth-order central difference.
double derivative(const std::function<double(double)>& f, double x, double h = 1e-4);

/// Nearest multiple of 2^-bits, ties toward zero, computed by scanning
/// candidate grid points instead of using a closed form.
double nearest_grid_point(double x, int bits);

/// Fraction of samples that leave their level when an interior level of a
/// b-bit converter grid (2^b - 1 steps over [0, 1]) gets N(0, sigma^2) noise
/// and is re-quantized to the nearest level. Levels are visited round-robin.
double monte_carlo_ep(int bits, double sigma, std::size_t trials, std::uint64_t seed);

/// Plain multinomial logistic regression trained by full-batch gradient
/// descent. Returns accuracy on the held-out set.
double logistic_probe(const std::vector<std::vector<double>>& train_x, const std::vector<int>& train_y,
                      const std::vector<std::vector<double>>& test_x, const std::vector<int>& test_y,
                      std::size_t classes, std::size_t iterations = 300, double lr = 0.5);

}  // namespace oracle
