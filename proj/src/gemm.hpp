#pragma once

// Dense row-major matrix kernels used by the conv and dense layers.
// Summation order depends only on the operand sizes, so results are
// bitwise reproducible run to run.

#include <cstddef>

namespace hgd::detail {

/// C[m x n] = (accumulate ? C : 0) + A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

/// C[m x n] = (accumulate ? C : 0) + A[m x k] * B[n x k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate);

/// dst[cols x rows] = src[rows x cols]^T
void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst);

}  // namespace hgd::detail
