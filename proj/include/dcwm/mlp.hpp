#pragma once

#include <string>
#include <vector>

#include "dcwm/graph.hpp"
#include "dcwm/mat.hpp"
#include "dcwm/param.hpp"
#include "dcwm/rng.hpp"

namespace dcwm {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
};

// MLP where every hidden layer is Linear -> LayerNorm (affine) -> Mish and
// the output layer is a plain Linear.  Two forward paths: a taped one for
// training and a plain eval for targets / planning, which share weights but
// not code paths.
template <typename T>
class Mlp {
 public:
  static constexpr T kLnEps = static_cast<T>(1e-5);

  Mlp() = default;
  Mlp(std::string name, MlpSpec spec);

  void init(Rng& rng);

  // Taped forward; frozen=true binds the parameters read-only so gradients
  // flow through the network but never into it (actor loss through critics).
  typename Graph<T>::NodeId forward(Graph<T>& g, typename Graph<T>::NodeId x,
                                    bool frozen = false);

  // Tape-free forward for target networks and planner rollouts.
  Mat<T> eval(const Mat<T>& x) const;

  std::vector<ParamBlock<T>*> params();
  std::vector<const ParamBlock<T>*> params() const;

  const MlpSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

  // Copy parameter values from another identically-shaped MLP.
  void copy_values_from(const Mlp& other);
  // Polyak average: value <- (1 - tau) * value + tau * other.value.
  void ema_from(const Mlp& other, T tau);

 private:
  std::string name_;
  MlpSpec spec_;
  // Per hidden layer: w, b, ln_gain, ln_bias; then output w, b.
  std::vector<ParamBlock<T>> blocks_;
};

}  // namespace dcwm
