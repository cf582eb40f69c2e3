#include "mmu/kernels.hpp"

#include <cmath>
#include <cstddef>

#include <omp.h>

#include "mmu/errors.hpp"

namespace mmu::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;

void check_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols != w.cols) throw ShapeError("dense_forward: input width does not match weight");
  if (b.size() != w.rows) throw ShapeError("dense_forward: bias length does not match weight");
}

inline double dot_row(const double* x, const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += x[k] * w[k];
  return acc;
}

}  // namespace

namespace serial {

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  check_forward(x, w, b);
  y = Matrix(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t o = 0; o < w.rows; ++o)
      y.data[i * w.rows + o] = dot_row(&x.data[i * x.cols], &w.data[o * w.cols], x.cols) + b[o];
}

void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols != w.rows) throw ShapeError("dense_backward_input: gradient width mismatch");
  dx = Matrix(dy.rows, w.cols);
  for (std::size_t i = 0; i < dy.rows; ++i)
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = dy.data[i * dy.cols + o];
      for (std::size_t k = 0; k < w.cols; ++k) dx.data[i * w.cols + k] += g * w.data[o * w.cols + k];
    }
}

void dense_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (dy.rows != x.rows || dw.rows != dy.cols || dw.cols != x.cols || db.size() != dy.cols)
    throw ShapeError("dense_backward_params: shape mismatch");
  for (std::size_t o = 0; o < dy.cols; ++o)
    for (std::size_t i = 0; i < dy.rows; ++i) {
      const double g = dy.data[i * dy.cols + o];
      db[o] += g;
      for (std::size_t k = 0; k < x.cols; ++k) dw.data[o * x.cols + k] += g * x.data[i * x.cols + k];
    }
}

void tanh_inplace(Matrix& y) {
  for (double& v : y.data) v = std::tanh(v);
}

void tanh_backward_inplace(const Matrix& out, Matrix& dy) {
  if (out.size() != dy.size()) throw ShapeError("tanh_backward: shape mismatch");
  for (std::size_t i = 0; i < dy.data.size(); ++i) dy.data[i] *= 1.0 - out.data[i] * out.data[i];
}

void rowwise_dot(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("rowwise_dot: shape mismatch");
  out = Matrix(a.rows, 1);
  for (std::size_t i = 0; i < a.rows; ++i) out.data[i] = dot_row(&a.data[i * a.cols], &b.data[i * b.cols], a.cols);
}

}  // namespace serial

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  check_forward(x, w, b);
  y = Matrix(x.rows, w.rows);
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
  const bool par = x.rows * w.rows * w.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < w.rows; ++o)
      y.data[i * w.rows + o] = dot_row(&x.data[i * x.cols], &w.data[o * w.cols], x.cols) + b[o];
}

void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols != w.rows) throw ShapeError("dense_backward_input: gradient width mismatch");
  dx = Matrix(dy.rows, w.cols);
  const auto n = static_cast<std::ptrdiff_t>(dy.rows);
  const bool par = dy.rows * w.rows * w.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = dy.data[i * dy.cols + o];
      for (std::size_t k = 0; k < w.cols; ++k) dx.data[i * w.cols + k] += g * w.data[o * w.cols + k];
    }
}

void dense_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (dy.rows != x.rows || dw.rows != dy.cols || dw.cols != x.cols || db.size() != dy.cols)
    throw ShapeError("dense_backward_params: shape mismatch");
  const auto outs = static_cast<std::ptrdiff_t>(dy.cols);
  const bool par = dy.rows * dy.cols * x.cols >= kParallelWork;
  // Each output unit owns its row of dw and its db entry.
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t o = 0; o < outs; ++o)
    for (std::size_t i = 0; i < dy.rows; ++i) {
      const double g = dy.data[i * dy.cols + o];
      db[o] += g;
      for (std::size_t k = 0; k < x.cols; ++k) dw.data[o * x.cols + k] += g * x.data[i * x.cols + k];
    }
}

void tanh_inplace(Matrix& y) {
  const auto n = static_cast<std::ptrdiff_t>(y.data.size());
#pragma omp parallel for schedule(static) if (y.data.size() >= kParallelWork / 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) y.data[i] = std::tanh(y.data[i]);
}

void tanh_backward_inplace(const Matrix& out, Matrix& dy) {
  if (out.size() != dy.size()) throw ShapeError("tanh_backward: shape mismatch");
  const auto n = static_cast<std::ptrdiff_t>(dy.data.size());
#pragma omp parallel for schedule(static) if (dy.data.size() >= kParallelWork / 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) dy.data[i] *= 1.0 - out.data[i] * out.data[i];
}

void rowwise_dot(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("rowwise_dot: shape mismatch");
  out = Matrix(a.rows, 1);
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static) if (a.size() >= kParallelWork)
  for (std::ptrdiff_t i = 0; i < n; ++i) out.data[i] = dot_row(&a.data[i * a.cols], &b.data[i * b.cols], a.cols);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace mmu::kernels
