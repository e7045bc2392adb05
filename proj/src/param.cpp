#include "dcwm/param.hpp"

#include <cmath>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
void adamw_step(const std::vector<ParamBlock<T>*>& blocks, const AdamConfig& cfg) {
  for (ParamBlock<T>* pb : blocks) {
    if (!pb->grad.all_finite())
      throw NumericalError("adamw_step: non-finite gradient in block '" + pb->name + "'");
  }
  for (ParamBlock<T>* pb : blocks) {
    pb->step_count += 1;
    const double t = static_cast<double>(pb->step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    T* v = pb->value.data.data();
    T* g = pb->grad.data.data();
    T* m = pb->adam_m.data.data();
    T* s = pb->adam_v.data.data();
    const size_t n = pb->value.size();
    for (size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double si = cfg.beta2 * static_cast<double>(s[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      s[i] = static_cast<T>(si);
      const double mhat = mi / bc1;
      const double shat = si / bc2;
      double x = static_cast<double>(v[i]);
      x -= cfg.lr * (mhat / (std::sqrt(shat) + cfg.eps) + cfg.weight_decay * x);
      v[i] = static_cast<T>(x);
      g[i] = T(0);
    }
    ++pb->version;
  }
}

template <typename T>
void init_linear(ParamBlock<T>& w, ParamBlock<T>& b, Rng& rng) {
  // w is out x in; fan_in is the input width.
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.value.cols));
  for (auto& x : w.value.data) x = static_cast<T>(rng.uniform(-bound, bound));
  for (auto& x : b.value.data) x = static_cast<T>(rng.uniform(-bound, bound));
  ++w.version;
  ++b.version;
}

template void adamw_step<float>(const std::vector<ParamBlock<float>*>&, const AdamConfig&);
template void adamw_step<double>(const std::vector<ParamBlock<double>*>&, const AdamConfig&);
template void init_linear<float>(ParamBlock<float>&, ParamBlock<float>&, Rng&);
template void init_linear<double>(ParamBlock<double>&, ParamBlock<double>&, Rng&);

}  // namespace dcwm
