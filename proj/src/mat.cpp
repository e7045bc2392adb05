#include "dcwm/mat.hpp"

#include <cblas.h>

namespace dcwm {

template <typename T>
void gemm(bool trans_a, bool trans_b, T alpha, const Mat<T>& a, const Mat<T>& b,
          T beta, Mat<T>& c) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int kb = trans_b ? b.cols : b.rows;
  const int n = trans_b ? b.rows : b.cols;
  if (k != kb)
    throw DimensionError("gemm: inner dims " + std::to_string(k) + " vs " + std::to_string(kb));
  require_shape(c, m, n, "gemm output");

  const auto ta = trans_a ? CblasTrans : CblasNoTrans;
  const auto tb = trans_b ? CblasTrans : CblasNoTrans;
  if constexpr (std::is_same_v<T, float>) {
    cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a.data.data(), a.cols,
                b.data.data(), b.cols, beta, c.data.data(), c.cols);
  } else {
    cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a.data.data(), a.cols,
                b.data.data(), b.cols, beta, c.data.data(), c.cols);
  }
}

template <typename T>
void add_row_sum(const Mat<T>& g, Mat<T>& y) {
  require_shape(y, 1, g.cols, "add_row_sum output");
  for (int r = 0; r < g.rows; ++r) {
    const T* gr = g.row(r);
    for (int c = 0; c < g.cols; ++c) y.data[c] += gr[c];
  }
}

template void gemm<float>(bool, bool, float, const Mat<float>&, const Mat<float>&, float, Mat<float>&);
template void gemm<double>(bool, bool, double, const Mat<double>&, const Mat<double>&, double, Mat<double>&);
template void add_row_sum<float>(const Mat<float>&, Mat<float>&);
template void add_row_sum<double>(const Mat<double>&, Mat<double>&);

}  // namespace dcwm
