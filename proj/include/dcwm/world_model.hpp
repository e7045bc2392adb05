#pragma once

#include <optional>
#include <vector>

#include "dcwm/fsq.hpp"
#include "dcwm/graph.hpp"
#include "dcwm/mlp.hpp"

namespace dcwm {

struct WorldModelConfig {
  int obs_dim = 0;
  int act_dim = 0;
  int latent_dim = 32;
  std::vector<int> fsq_levels = {5, 3};
  Encoding encoding = Encoding::kCodes;
  std::vector<int> encoder_hidden = {256};
  std::vector<int> mlp_hidden = {512, 512};
  double gs_tau = 1.0;        // Gumbel-softmax temperature
  double discount = 0.9;      // per-step weight on the loss horizon
};

// Per-dimension categorical next-code distribution.
template <typename T>
struct DynamicsDistribution {
  Mat<T> logits;  // d x |C|
  Mat<T> probs;   // d x |C|
};

// One training segment: H+1 observation batches, H action/reward batches.
template <typename T>
struct WmBatch {
  std::vector<Mat<T>> obs;      // length H+1, each B x obs_dim
  std::vector<Mat<T>> actions;  // length H, each B x act_dim
  std::vector<Mat<T>> rewards;  // length H, each B x 1
};

// Graph-backed training rollout: codes[0] is the straight-through encoding
// of obs[0], codes[h+1] the straight-through Gumbel sample from the
// dynamics distribution at step h.  Losses, codes and logits are node
// handles into `graph`.
template <typename T>
struct RolloutTrace {
  Graph<T> graph;
  typename Graph<T>::NodeId loss = -1;
  std::vector<typename Graph<T>::NodeId> codes;   // H+1 nodes, B x d*b
  std::vector<typename Graph<T>::NodeId> logits;  // H nodes, B x d*|C|
  T loss_value = 0;
  T ce_value = 0;      // cross-entropy part of the loss
  T reward_value = 0;  // squared-error part
};

// Latent world model: encoder + FSQ bottleneck, categorical latent dynamics
// trained by cross-entropy, scalar reward head.  The dynamics always consume
// raw code symbols; the configured encoding only changes what the reward
// head (and downstream value/policy networks) see.
template <typename T>
class WorldModel {
 public:
  WorldModel(WorldModelConfig cfg, Rng& rng);

  const WorldModelConfig& config() const { return cfg_; }
  const Codebook<T>& codebook() const { return cb_; }
  int code_width() const { return cfg_.latent_dim * cb_.channels(); }
  // Input width of reward/value/policy networks under the configured encoding.
  int encoded_width() const {
    return cfg_.latent_dim * encoding_width(cfg_.encoding, cb_.size(), cb_.channels());
  }

  // --- tape-free inference ---
  Mat<T> encode_codes(const Mat<T>& obs) const;  // B x code_width, quantized
  LatentCode<T> encode(const std::vector<T>& obs) const;
  Mat<T> dynamics_logits(const Mat<T>& codes, const Mat<T>& actions) const;
  DynamicsDistribution<T> dynamics_forward(const LatentCode<T>& code,
                                           const std::vector<T>& action) const;
  Mat<T> reward_predict(const Mat<T>& encoded, const Mat<T>& actions) const;
  // Apply the configured encoding to a batch of code rows.
  Mat<T> apply_encoding(const Mat<T>& codes) const {
    return encode_variant(cb_, cfg_.encoding, codes, cfg_.latent_dim);
  }

  // --- training ---
  // Builds the multi-step latent-consistency + reward loss.  Gumbel noise
  // comes from `rng` unless `frozen_noise` (one (B*d) x |C| matrix per step,
  // H of them) is supplied, which makes the loss a deterministic function of
  // the parameters for finite-difference checks.  `soft_forward` swaps the
  // straight-through quantizer/sampler forwards for their differentiable
  // relaxations (test use only; the backward pass is identical either way).
  RolloutTrace<T> build_loss(const WmBatch<T>& batch, Rng* rng,
                             const std::vector<Mat<T>>* frozen_noise = nullptr,
                             bool soft_forward = false);

  std::vector<ParamBlock<T>*> encoder_params() { return encoder_.params(); }
  std::vector<ParamBlock<T>*> dynamics_params();  // dynamics + reward blocks
  std::vector<ParamBlock<T>*> all_params();

  Mlp<T>& encoder() { return encoder_; }
  Mlp<T>& dynamics() { return dynamics_; }
  Mlp<T>& reward() { return reward_; }

 private:
  WorldModelConfig cfg_;
  Codebook<T> cb_;
  Mlp<T> encoder_;
  Mlp<T> dynamics_;
  Mlp<T> reward_;
};

// Probability-weighted average of codebook rows for each latent dimension:
// probs is (B*d) x |C|, result is B x (d*channels).
template <typename T>
Mat<T> expected_code(const Codebook<T>& cb, const Mat<T>& probs, int batch, int latent_dim);

// Draw one straight-through Gumbel sample from a single-sample distribution.
template <typename T>
LatentCode<T> gumbel_st_sample(const Codebook<T>& cb, const DynamicsDistribution<T>& dist,
                               T tau, Rng& rng);

}  // namespace dcwm
