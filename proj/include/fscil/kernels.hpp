#pragma once

#include <cstddef>

// Row-major batched primitives behind every forward/backward pass.
//
// Determinism contract: each parallel loop iterates over independent output
// elements and every reduction inside an iteration runs in a fixed serial
// order, so results are bit-identical to the serial fscil::kernels::ref
// versions at any thread count. Tests assert bitwise equality; fscil-bench
// compares throughput.
namespace fscil::kernels {

// y = x * w^T (+ bias)    x: n*in, w: out*in, bias: out or nullptr, y: n*out
void linear_forward(const double* x, std::size_t n, std::size_t in, const double* w,
                    std::size_t out, const double* bias, double* y);

// dw += dy^T * x          dy: n*out, x: n*in, dw: out*in
void linear_grad_weight(const double* dy, const double* x, std::size_t n,
                        std::size_t in, std::size_t out, double* dw);

// dbias += column sums of dy
void linear_grad_bias(const double* dy, std::size_t n, std::size_t out, double* dbias);

// dx = dy * w             dy: n*out, w: out*in, dx: n*in (overwritten)
void linear_grad_input(const double* dy, const double* w, std::size_t n, std::size_t in,
                       std::size_t out, double* dx);

// a = max(z, 0)
void relu(const double* z, double* a, std::size_t n);

// dz = da where z > 0, else 0
void relu_backward(const double* z, const double* da, double* dz, std::size_t n);

namespace ref {  // serial reference, kept for tests and the benchmark

void linear_forward(const double* x, std::size_t n, std::size_t in, const double* w,
                    std::size_t out, const double* bias, double* y);
void linear_grad_weight(const double* dy, const double* x, std::size_t n,
                        std::size_t in, std::size_t out, double* dw);
void linear_grad_bias(const double* dy, std::size_t n, std::size_t out, double* dbias);
void linear_grad_input(const double* dy, const double* w, std::size_t n, std::size_t in,
                       std::size_t out, double* dx);
void relu(const double* z, double* a, std::size_t n);
void relu_backward(const double* z, const double* da, double* dz, std::size_t n);

}  // namespace ref

}  // namespace fscil::kernels
