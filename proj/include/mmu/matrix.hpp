#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mmu {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> index);

// Horizontal concatenation [a | b]; row counts must agree.
Matrix hconcat(const Matrix& a, const Matrix& b);

// Split columns [0, left_cols) and [left_cols, cols).
void hsplit(const Matrix& m, std::size_t left_cols, Matrix& left, Matrix& right);

void add_inplace(Matrix& dst, const Matrix& src);

}  // namespace mmu
