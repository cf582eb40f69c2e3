#pragma once

// Dense-layer kernels. Two implementations with the same interface:
//   mmu::kernels::serial   - plain loops, the reference
//   mmu::kernels           - OpenMP parallel over independent output elements
// Both accumulate every output element in the same order, so their results
// are bitwise identical for any thread count.

#include <span>

#include "mmu/matrix.hpp"

namespace mmu::kernels {

namespace serial {

// y = x * w^T + b   with x: n x in, w: out x in, b: out, y: n x out
void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
// dx = dy * w       with dy: n x out
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
// dw += dy^T * x, db += column sums of dy
void dense_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
// y = tanh(y) elementwise
void tanh_inplace(Matrix& y);
// dy *= 1 - out^2
void tanh_backward_inplace(const Matrix& out, Matrix& dy);
// out[i] = <a_i, b_i>
void rowwise_dot(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace serial

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void dense_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db);
void tanh_inplace(Matrix& y);
void tanh_backward_inplace(const Matrix& out, Matrix& dy);
void rowwise_dot(const Matrix& a, const Matrix& b, Matrix& out);

int max_threads();

}  // namespace mmu::kernels
