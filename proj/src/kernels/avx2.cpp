#include "relzero/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "lane_gemm.hpp"

namespace relzero::kernels {
namespace {

using detail::Init;
using detail::LaneGemm;

__m256d start4(const LaneGemm& g, std::size_t r, std::size_t l) {
  switch (g.init) {
    case Init::bias: return _mm256_set1_pd(g.bias[r]);
    case Init::zero: return _mm256_setzero_pd();
    case Init::accumulate: return _mm256_loadu_pd(g.c + r * g.ldc + l);
  }
  return _mm256_setzero_pd();
}

// 4 rows x 8 lanes register block, then 1 row x 4 lanes, then scalar lanes.
void run(const LaneGemm& g) {
  std::size_t r = 0;
  for (; r + 4 <= g.rows; r += 4) {
    std::size_t l = 0;
    for (; l + 8 <= g.lanes; l += 8) {
      __m256d acc[4][2];
      for (int rr = 0; rr < 4; ++rr) {
        acc[rr][0] = start4(g, r + rr, l);
        acc[rr][1] = start4(g, r + rr, l + 4);
      }
      for (std::size_t k = 0; k < g.depth; ++k) {
        const double* brow = g.b + k * g.ldb + l;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        for (int rr = 0; rr < 4; ++rr) {
          const __m256d a = _mm256_set1_pd(g.a[(r + rr) * g.a_row + k * g.a_depth]);
          acc[rr][0] = _mm256_add_pd(acc[rr][0], _mm256_mul_pd(a, b0));
          acc[rr][1] = _mm256_add_pd(acc[rr][1], _mm256_mul_pd(a, b1));
        }
      }
      for (int rr = 0; rr < 4; ++rr) {
        _mm256_storeu_pd(g.c + (r + rr) * g.ldc + l, acc[rr][0]);
        _mm256_storeu_pd(g.c + (r + rr) * g.ldc + l + 4, acc[rr][1]);
      }
    }
    for (int rr = 0; rr < 4; ++rr) {
      for (std::size_t t = l; t < g.lanes; ++t) g.c[(r + rr) * g.ldc + t] = g.lane_scalar(r + rr, t);
    }
  }
  for (; r < g.rows; ++r) {
    std::size_t l = 0;
    for (; l + 4 <= g.lanes; l += 4) {
      __m256d acc = start4(g, r, l);
      for (std::size_t k = 0; k < g.depth; ++k) {
        const __m256d a = _mm256_set1_pd(g.a[r * g.a_row + k * g.a_depth]);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(a, _mm256_loadu_pd(g.b + k * g.ldb + l)));
      }
      _mm256_storeu_pd(g.c + r * g.ldc + l, acc);
    }
    for (; l < g.lanes; ++l) g.c[r * g.ldc + l] = g.lane_scalar(r, l);
  }
}

void distances_from(const double* x, std::size_t stride, std::size_t dim, std::size_t i,
                    std::size_t begin, std::size_t end, double* out) {
  std::size_t j = begin;
  for (; j + 4 <= end; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff =
          _mm256_sub_pd(_mm256_loadu_pd(x + d * stride + j), _mm256_set1_pd(x[d * stride + i]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + (j - begin), _mm256_sqrt_pd(acc));
  }
  for (; j < end; ++j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = x[d * stride + j] - x[d * stride + i];
      acc = acc + diff * diff;
    }
    out[j - begin] = std::sqrt(acc);
  }
}

void dense_forward(const double* w, const double* bias, std::size_t out, std::size_t in,
                   const double* x, std::size_t batch, double* y) {
  run({out, in, batch, w, in, 1, x, batch, y, batch, Init::bias, bias});
}

void dense_backward_input(const double* w, std::size_t out, std::size_t in, const double* dy,
                          std::size_t batch, double* dx) {
  run({in, out, batch, w, 1, in, dy, batch, dx, batch, Init::zero, nullptr});
}

void dense_grad_weights(const double* dy, const double* xt, std::size_t out, std::size_t in,
                        std::size_t batch, double* gw) {
  run({out, batch, in, dy, batch, 1, xt, in, gw, in, Init::accumulate, nullptr});
}

constexpr KernelSet kAvx2{"avx2", distances_from, dense_forward, dense_backward_input,
                          dense_grad_weights};

}  // namespace

const KernelSet* avx2() {
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2 : nullptr;
}

}  // namespace relzero::kernels

#else

namespace relzero::kernels {
const KernelSet* avx2() { return nullptr; }
}  // namespace relzero::kernels

#endif
