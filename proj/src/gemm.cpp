#include "gemm.hpp"

#include <algorithm>
#include <cstring>

namespace hgd::detail {

namespace {

constexpr std::size_t kLanes = 8;

// Dot products of `rows` consecutive A rows against one B row. Lane-split
// accumulators let the compiler vectorise without reassociating anything.
template <std::size_t Rows>
void dot_block(const double* a, std::size_t k, const double* b, double* out) {
  double acc[Rows][kLanes] = {};
  std::size_t p = 0;
  for (; p + kLanes <= k; p += kLanes) {
    for (std::size_t r = 0; r < Rows; ++r) {
      const double* ar = a + r * k + p;
      for (std::size_t l = 0; l < kLanes; ++l) acc[r][l] += ar[l] * b[p + l];
    }
  }
  for (std::size_t r = 0; r < Rows; ++r) {
    double tail = 0.0;
    for (std::size_t q = p; q < k; ++q) tail += a[r * k + q] * b[q];
    double s = 0.0;
    for (std::size_t l = 0; l < kLanes; ++l) s += acc[r][l];
    out[r] = s + tail;
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  if (!accumulate) std::memset(c, 0, sizeof(double) * m * n);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* __restrict c0 = c + i * n;
    double* __restrict c1 = c0 + n;
    double* __restrict c2 = c1 + n;
    double* __restrict c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p];
      const double x1 = a0[k + p];
      const double x2 = a0[2 * k + p];
      const double x3 = a0[3 * k + p];
      const double* __restrict bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = bp[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += x * bp[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  double out[4];
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n; ++j) {
      dot_block<4>(a + i * k, k, b + j * k, out);
      for (std::size_t r = 0; r < 4; ++r) {
        double& dst = c[(i + r) * n + j];
        dst = accumulate ? dst + out[r] : out[r];
      }
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dot_block<1>(a + i * k, k, b + j * k, out);
      double& dst = c[i * n + j];
      dst = accumulate ? dst + out[0] : out[0];
    }
  }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
  constexpr std::size_t tile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += tile) {
    const std::size_t r1 = std::min(rows, r0 + tile);
    for (std::size_t c0 = 0; c0 < cols; c0 += tile) {
      const std::size_t c1 = std::min(cols, c0 + tile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t col = c0; col < c1; ++col) dst[col * rows + r] = src[r * cols + col];
      }
    }
  }
}

}  // namespace hgd::detail
