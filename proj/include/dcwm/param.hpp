#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcwm/mat.hpp"
#include "dcwm/rng.hpp"

namespace dcwm {

// A named trainable tensor with its gradient accumulator and AdamW state.
// `version` bumps on every in-place value mutation so autodiff tapes can
// detect staleness.
template <typename T>
struct ParamBlock {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  Mat<T> adam_m;
  Mat<T> adam_v;
  int64_t step_count = 0;
  uint64_t version = 0;

  ParamBlock() = default;
  ParamBlock(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols),
        adam_m(rows, cols), adam_v(rows, cols) {}

  void zero_grad() { grad.zero(); }

  // Overwrite values (init / checkpoint load); resets nothing else.
  void set_value(const Mat<T>& v) {
    require_shape(v, value.rows, value.cols, name.c_str());
    value = v;
    ++version;
  }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One decoupled-weight-decay Adam step over `blocks`.  Gradients are
// consumed (zeroed) afterwards.  Throws NumericalError naming the first
// block with a non-finite gradient.
template <typename T>
void adamw_step(const std::vector<ParamBlock<T>*>& blocks, const AdamConfig& cfg);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, row-major fill order.
template <typename T>
void init_linear(ParamBlock<T>& w, ParamBlock<T>& b, Rng& rng);

}  // namespace dcwm
