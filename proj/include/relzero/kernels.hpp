#pragma once

#include <cstddef>
#include <string_view>

namespace relzero::kernels {

// Data-parallel inner loops behind pairwise distances and the pair predictor.
//
// Every kernel vectorizes across independent lanes (pair targets or batch
// columns) and keeps the per-lane accumulation order of the scalar reference,
// with separate multiply and add. Variants therefore agree bit for bit, and
// the watermark a given image produces does not depend on the host CPU.
//
// Layout conventions:
//   feature-major  x[d * stride + j]   (dimension d of item j)
//   row-major W    w[o * in + c]
struct KernelSet {
  const char* name;

  // out[j - begin] = || x[:, j] - x[:, i] ||_2 for j in [begin, end).
  void (*distances_from)(const double* x, std::size_t stride, std::size_t dim, std::size_t i,
                         std::size_t begin, std::size_t end, double* out);

  // y[o, b] = bias[o] + sum_c w[o, c] * x[c, b]; x is in x batch, y is out x batch.
  void (*dense_forward)(const double* w, const double* bias, std::size_t out, std::size_t in,
                        const double* x, std::size_t batch, double* y);

  // dx[c, b] = sum_o w[o, c] * dy[o, b].
  void (*dense_backward_input)(const double* w, std::size_t out, std::size_t in, const double* dy,
                               std::size_t batch, double* dx);

  // gw[o, c] += sum_b dy[o, b] * xt[b, c]; xt is the batch-major transpose of x.
  void (*dense_grad_weights)(const double* dy, const double* xt, std::size_t out, std::size_t in,
                             std::size_t batch, double* gw);
};

const KernelSet& scalar();
/// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelSet* avx2();
const KernelSet* neon();

/// Kernel set in use. Picks the widest supported variant on first call;
/// the RELZERO_KERNEL environment variable ("scalar", "avx2", "neon") overrides.
const KernelSet& active();

/// Forces a variant by name; returns false if it is unavailable.
bool select(std::string_view name);

}  // namespace relzero::kernels
