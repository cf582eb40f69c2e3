#include "mmu/matrix.hpp"

#include <algorithm>

#include "mmu/errors.hpp"

namespace mmu {

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> index) {
  Matrix out(index.size(), src.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= src.rows) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(index[i] * src.cols), src.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * src.cols));
  }
  return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ShapeError("hconcat: row counts differ");
  Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols));
  }
  return out;
}

void hsplit(const Matrix& m, std::size_t left_cols, Matrix& left, Matrix& right) {
  if (left_cols > m.cols) throw ShapeError("hsplit: split point beyond column count");
  left = Matrix(m.rows, left_cols);
  right = Matrix(m.rows, m.cols - left_cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto src = m.row(r);
    std::copy_n(src.begin(), left_cols, left.row(r).begin());
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(left_cols), src.end(), right.row(r).begin());
  }
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (dst.rows != src.rows || dst.cols != src.cols) throw ShapeError("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace mmu
