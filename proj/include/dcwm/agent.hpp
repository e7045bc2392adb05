#pragma once

#include <vector>

#include "dcwm/graph.hpp"
#include "dcwm/mlp.hpp"

namespace dcwm {

struct TdConfig {
  double discount = 0.99;
  int nstep = 3;
  int num_q = 5;         // critic ensemble size
  int subsample = 2;     // ensemble members entering min / actor mean
  double policy_noise = 0.2;
  double noise_clip = 0.3;
  double ema_tau = 0.005;
};

// Graph plus the scalar loss handle, so the caller decides when to run
// backward and step.
template <typename T>
struct LossTape {
  Graph<T> graph;
  typename Graph<T>::NodeId loss = -1;
  T value = 0;
};

// Critic ensemble + deterministic squashed policy with EMA target copies.
// Inputs are encoded latents (whatever encoding the world model is
// configured with); the agent never sees raw observations.
template <typename T>
class Agent {
 public:
  Agent(int enc_width, int act_dim, const std::vector<int>& hidden, TdConfig cfg,
        const std::vector<T>& act_lo, const std::vector<T>& act_hi, Rng& rng);

  const TdConfig& config() const { return cfg_; }
  int act_dim() const { return act_dim_; }

  // --- tape-free evaluation ---
  Mat<T> policy_actions(const Mat<T>& enc) const;         // live, squashed
  Mat<T> target_policy_actions(const Mat<T>& enc) const;
  // B x 1 values from live critic k on pre-concatenated (enc | action) rows.
  Mat<T> critic_value(int k, const Mat<T>& enc, const Mat<T>& actions) const;
  // Mean over all live critics (planner bootstrap).
  Mat<T> critic_mean(const Mat<T>& enc, const Mat<T>& actions) const;

  // N-step TD target: y = nstep_reward + discount^nstep * min_{k in M}
  // qbar_k(enc', pi_bar(enc') + clipped noise).  M is `subsample` target
  // critics drawn once per call.  Throws NumericalError on non-finite y.
  Mat<T> td_target(const Mat<T>& nstep_reward, const Mat<T>& next_enc, Rng& rng) const;

  // Mean squared TD error over batch and all num_q live critics.
  LossTape<T> critic_loss(const Mat<T>& enc, const Mat<T>& actions, const Mat<T>& target);

  // -mean over batch and a fresh `subsample` of live critics of
  // q(enc, pi(enc)); critics are bound frozen so only the policy trains.
  LossTape<T> actor_loss(const Mat<T>& enc, Rng& rng);

  // Polyak step of all target networks toward the live ones.
  void ema_update();

  std::vector<ParamBlock<T>*> critic_params();
  std::vector<ParamBlock<T>*> policy_params() { return policy_.params(); }

  Mlp<T>& critic(int k) { return critics_[k]; }
  Mlp<T>& target_critic(int k) { return target_critics_[k]; }
  Mlp<T>& policy() { return policy_; }
  Mlp<T>& target_policy() { return target_policy_; }

  // Squash raw policy outputs into the action box.
  Mat<T> squash(const Mat<T>& raw) const;
  void clip_to_bounds(Mat<T>& actions) const;
  const std::vector<T>& act_lo() const { return lo_; }
  const std::vector<T>& act_hi() const { return hi_; }

 private:
  TdConfig cfg_;
  int act_dim_;
  std::vector<T> lo_, hi_;
  Mat<T> scale_, shift_;  // 1 x act_dim affine from tanh output to bounds
  std::vector<Mlp<T>> critics_, target_critics_;
  Mlp<T> policy_, target_policy_;
};

}  // namespace dcwm
