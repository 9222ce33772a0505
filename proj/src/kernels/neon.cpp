#include "relzero/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "lane_gemm.hpp"

namespace relzero::kernels {
namespace {

using detail::Init;
using detail::LaneGemm;

float64x2_t start2(const LaneGemm& g, std::size_t r, std::size_t l) {
  switch (g.init) {
    case Init::bias: return vdupq_n_f64(g.bias[r]);
    case Init::zero: return vdupq_n_f64(0.0);
    case Init::accumulate: return vld1q_f64(g.c + r * g.ldc + l);
  }
  return vdupq_n_f64(0.0);
}

// vmulq + vaddq rather than vfmaq: the scalar reference rounds twice.
void run(const LaneGemm& g) {
  std::size_t r = 0;
  for (; r + 4 <= g.rows; r += 4) {
    std::size_t l = 0;
    for (; l + 4 <= g.lanes; l += 4) {
      float64x2_t acc[4][2];
      for (int rr = 0; rr < 4; ++rr) {
        acc[rr][0] = start2(g, r + rr, l);
        acc[rr][1] = start2(g, r + rr, l + 2);
      }
      for (std::size_t k = 0; k < g.depth; ++k) {
        const double* brow = g.b + k * g.ldb + l;
        const float64x2_t b0 = vld1q_f64(brow);
        const float64x2_t b1 = vld1q_f64(brow + 2);
        for (int rr = 0; rr < 4; ++rr) {
          const float64x2_t a = vdupq_n_f64(g.a[(r + rr) * g.a_row + k * g.a_depth]);
          acc[rr][0] = vaddq_f64(acc[rr][0], vmulq_f64(a, b0));
          acc[rr][1] = vaddq_f64(acc[rr][1], vmulq_f64(a, b1));
        }
      }
      for (int rr = 0; rr < 4; ++rr) {
        vst1q_f64(g.c + (r + rr) * g.ldc + l, acc[rr][0]);
        vst1q_f64(g.c + (r + rr) * g.ldc + l + 2, acc[rr][1]);
      }
    }
    for (int rr = 0; rr < 4; ++rr) {
      for (std::size_t t = l; t < g.lanes; ++t) g.c[(r + rr) * g.ldc + t] = g.lane_scalar(r + rr, t);
    }
  }
  for (; r < g.rows; ++r) {
    std::size_t l = 0;
    for (; l + 2 <= g.lanes; l += 2) {
      float64x2_t acc = start2(g, r, l);
      for (std::size_t k = 0; k < g.depth; ++k) {
        const float64x2_t a = vdupq_n_f64(g.a[r * g.a_row + k * g.a_depth]);
        acc = vaddq_f64(acc, vmulq_f64(a, vld1q_f64(g.b + k * g.ldb + l)));
      }
      vst1q_f64(g.c + r * g.ldc + l, acc);
    }
    for (; l < g.lanes; ++l) g.c[r * g.ldc + l] = g.lane_scalar(r, l);
  }
}

void distances_from(const double* x, std::size_t stride, std::size_t dim, std::size_t i,
                    std::size_t begin, std::size_t end, double* out) {
  std::size_t j = begin;
  for (; j + 2 <= end; j += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      const float64x2_t diff = vsubq_f64(vld1q_f64(x + d * stride + j), vdupq_n_f64(x[d * stride + i]));
      acc = vaddq_f64(acc, vmulq_f64(diff, diff));
    }
    vst1q_f64(out + (j - begin), vsqrtq_f64(acc));
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

constexpr KernelSet kNeon{"neon", distances_from, dense_forward, dense_backward_input,
                          dense_grad_weights};

}  // namespace

const KernelSet* neon() { return &kNeon; }

}  // namespace relzero::kernels

#else

namespace relzero::kernels {
const KernelSet* neon() { return nullptr; }
}  // namespace relzero::kernels

#endif
