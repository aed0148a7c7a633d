// SPDX-FileCopyrightText: 2026 The agrad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

// Row-major dense kernels used by matmul and conv2d. All of them accumulate
// into C.
namespace agrad::linalg {

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m x n] += A[m x k] * B^T, with B stored as [n x k]
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
// C[m x n] += A^T * B, with A stored as [k x m] and B as [k x n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);

}  // namespace agrad::linalg
