#pragma once

#include <cstddef>

namespace relzero::kernels::detail {

// C[r, l] = init(r, l) + sum_k A[r, k] * B[k, l], lanes l contiguous in B and C.
// A is addressed as a[r * a_row + k * a_depth] so transposed weights need no copy.
enum class Init { bias, zero, accumulate };

struct LaneGemm {
  std::size_t rows, depth, lanes;
  const double* a;
  std::size_t a_row, a_depth;
  const double* b;
  std::size_t ldb;
  double* c;
  std::size_t ldc;
  Init init;
  const double* bias;

  double start(std::size_t r, std::size_t l) const {
    switch (init) {
      case Init::bias: return bias[r];
      case Init::zero: return 0.0;
      case Init::accumulate: return c[r * ldc + l];
    }
    return 0.0;
  }

  double lane_scalar(std::size_t r, std::size_t l) const {
    double acc = start(r, l);
    for (std::size_t k = 0; k < depth; ++k) acc = acc + a[r * a_row + k * a_depth] * b[k * ldb + l];
    return acc;
  }
};

}  // namespace relzero::kernels::detail
