#include <cmath>

#include "relzero/kernels.hpp"

namespace relzero::kernels {
namespace {

void distances_from(const double* x, std::size_t stride, std::size_t dim, std::size_t i,
                    std::size_t begin, std::size_t end, double* out) {
  for (std::size_t j = begin; j < end; ++j) {
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
  for (std::size_t o = 0; o < out; ++o) {
    const double* wrow = w + o * in;
    for (std::size_t b = 0; b < batch; ++b) {
      double acc = bias[o];
      for (std::size_t c = 0; c < in; ++c) acc = acc + wrow[c] * x[c * batch + b];
      y[o * batch + b] = acc;
    }
  }
}

void dense_backward_input(const double* w, std::size_t out, std::size_t in, const double* dy,
                          std::size_t batch, double* dx) {
  for (std::size_t c = 0; c < in; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc = acc + w[o * in + c] * dy[o * batch + b];
      dx[c * batch + b] = acc;
    }
  }
}

void dense_grad_weights(const double* dy, const double* xt, std::size_t out, std::size_t in,
                        std::size_t batch, double* gw) {
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t c = 0; c < in; ++c) {
      double acc = gw[o * in + c];
      for (std::size_t b = 0; b < batch; ++b) acc = acc + dy[o * batch + b] * xt[b * in + c];
      gw[o * in + c] = acc;
    }
  }
}

constexpr KernelSet kScalar{"scalar", distances_from, dense_forward, dense_backward_input,
                            dense_grad_weights};

}  // namespace

const KernelSet& scalar() { return kScalar; }

}  // namespace relzero::kernels
