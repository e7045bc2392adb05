#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dcwm/errors.hpp"

namespace dcwm {

// Dense row-major matrix over float or double.  Deliberately minimal: the
// heavy lifting (GEMM) goes through BLAS, everything else is plain loops.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}
  Mat(int r, int c, T fill) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }

  T* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  T at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

// C = alpha * op(A) @ op(B) + beta * C, dispatching to cblas_{s,d}gemm.
// C must already have the right shape.
template <typename T>
void gemm(bool trans_a, bool trans_b, T alpha, const Mat<T>& a, const Mat<T>& b,
          T beta, Mat<T>& c);

// y += sum of rows of g (used for bias gradients).  y is 1 x cols.
template <typename T>
void add_row_sum(const Mat<T>& g, Mat<T>& y);

// Shape-check helper: throws DimensionError naming `where`.
template <typename T>
void require_shape(const Mat<T>& m, int rows, int cols, const char* where) {
  if (m.rows != rows || m.cols != cols)
    throw DimensionError(std::string(where) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols));
}

// Numerically stable softplus, used by mish.
template <typename T>
inline T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
inline T mish(T x) {
  return x * std::tanh(softplus(x));
}

}  // namespace dcwm
