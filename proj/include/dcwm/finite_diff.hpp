#pragma once

#include <functional>
#include <vector>

#include "dcwm/param.hpp"

namespace dcwm {

// Central-difference gradient of `loss` with respect to every element of
// `blocks`.  `loss` must re-run the full forward pass on each call (it reads
// the current block values).  Intended for T = double in tests; O(2 * #params)
// loss evaluations.
template <typename T>
std::vector<Mat<T>> finite_diff_grad(const std::function<T()>& loss,
                                     const std::vector<ParamBlock<T>*>& blocks, T h) {
  std::vector<Mat<T>> grads;
  grads.reserve(blocks.size());
  for (ParamBlock<T>* pb : blocks) {
    Mat<T> g(pb->value.rows, pb->value.cols);
    for (size_t i = 0; i < pb->value.size(); ++i) {
      const T saved = pb->value.data[i];
      pb->value.data[i] = saved + h;
      const T up = loss();
      pb->value.data[i] = saved - h;
      const T down = loss();
      pb->value.data[i] = saved;
      g.data[i] = (up - down) / (T(2) * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// Max relative error between analytic and finite-difference gradients,
// with an absolute floor to keep near-zero entries from blowing up the
// denominator.
template <typename T>
T max_rel_error(const Mat<T>& analytic, const Mat<T>& numeric, T floor = T(1e-6)) {
  T worst = 0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    const T a = analytic.data[i];
    const T n = numeric.data[i];
    const T denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

}  // namespace dcwm
