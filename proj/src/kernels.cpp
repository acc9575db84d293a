#include "fscil/kernels.hpp"

#include <cstdint>

namespace fscil::kernels {

namespace ref {

void linear_forward(const double* x, std::size_t n, std::size_t in, const double* w,
                    std::size_t out, const double* bias, double* y) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x + r * in;
    double* yr = y + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = bias != nullptr ? bias[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
}

void linear_grad_weight(const double* dy, const double* x, std::size_t n,
                        std::size_t in, std::size_t out, double* dw) {
  for (std::size_t o = 0; o < out; ++o) {
    double* dwo = dw + o * in;
    for (std::size_t r = 0; r < n; ++r) {
      const double g = dy[r * out + o];
      if (g == 0.0) continue;
      const double* xr = x + r * in;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
  }
}

void linear_grad_bias(const double* dy, std::size_t n, std::size_t out, double* dbias) {
  for (std::size_t o = 0; o < out; ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + o];
    dbias[o] += acc;
  }
}

void linear_grad_input(const double* dy, const double* w, std::size_t n, std::size_t in,
                       std::size_t out, double* dx) {
  for (std::size_t r = 0; r < n; ++r) {
    const double* dyr = dy + r * out;
    double* dxr = dx + r * in;
    for (std::size_t i = 0; i < in; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      const double* wo = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

void relu(const double* z, double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(const double* z, const double* da, double* dz, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dz[i] = z[i] > 0.0 ? da[i] : 0.0;
}

}  // namespace ref

// small problems are not worth spawning a team for
constexpr std::size_t kParallelCutoff = 16 * 1024;

void linear_forward(const double* x, std::size_t n, std::size_t in, const double* w,
                    std::size_t out, const double* bias, double* y) {
  const bool par = n * in * out >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r) {
    const double* xr = x + static_cast<std::size_t>(r) * in;
    double* yr = y + static_cast<std::size_t>(r) * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = bias != nullptr ? bias[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
}

void linear_grad_weight(const double* dy, const double* x, std::size_t n,
                        std::size_t in, std::size_t out, double* dw) {
  const bool par = n * in * out >= kParallelCutoff;
  // each thread owns whole rows of dw; the sum over the batch stays serial
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(out); ++o) {
    double* dwo = dw + static_cast<std::size_t>(o) * in;
    for (std::size_t r = 0; r < n; ++r) {
      const double g = dy[r * out + static_cast<std::size_t>(o)];
      if (g == 0.0) continue;
      const double* xr = x + r * in;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
  }
}

void linear_grad_bias(const double* dy, std::size_t n, std::size_t out, double* dbias) {
  const bool par = n * out >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t o = 0; o < static_cast<std::int64_t>(out); ++o) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) acc += dy[r * out + static_cast<std::size_t>(o)];
    dbias[static_cast<std::size_t>(o)] += acc;
  }
}

void linear_grad_input(const double* dy, const double* w, std::size_t n, std::size_t in,
                       std::size_t out, double* dx) {
  const bool par = n * in * out >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r) {
    const double* dyr = dy + static_cast<std::size_t>(r) * out;
    double* dxr = dx + static_cast<std::size_t>(r) * in;
    for (std::size_t i = 0; i < in; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      const double* wo = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

void relu(const double* z, double* a, std::size_t n) {
  const bool par = n >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    a[i] = z[i] > 0.0 ? z[i] : 0.0;
  }
}

void relu_backward(const double* z, const double* da, double* dz, std::size_t n) {
  const bool par = n >= kParallelCutoff;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    dz[i] = z[i] > 0.0 ? da[i] : 0.0;
  }
}

}  // namespace fscil::kernels
