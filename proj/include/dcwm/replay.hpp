#pragma once

#include <cstdint>
#include <vector>

#include "dcwm/mat.hpp"
#include "dcwm/rng.hpp"

namespace dcwm {

// Contiguous multi-step slice of the buffer: `window` transitions drawn from
// inside single episodes, stacked over the batch.  obs[i+1] is always the
// successor observation of (obs[i], actions[i]).
template <typename T>
struct SampledBatch {
  std::vector<Mat<T>> obs;      // window+1 matrices, batch x obs_dim
  std::vector<Mat<T>> actions;  // window matrices, batch x act_dim
  std::vector<Mat<T>> rewards;  // window matrices, batch x 1
};

// Fixed-capacity FIFO ring of (o, a, o', r) transitions tagged with episode
// ids so sampled windows never straddle an episode boundary.
template <typename T>
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int obs_dim, int act_dim);

  void begin_episode() { ++episode_; }
  void push(const std::vector<double>& obs, const std::vector<double>& action,
            const std::vector<double>& next_obs, double reward);

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  SampledBatch<T> sample(int batch, int window, Rng& rng) const;

  // Logical index 0 is the oldest stored transition.
  int64_t episode_at(size_t logical) const { return ids_[phys(logical)]; }
  const T* obs_at(size_t logical) const { return &obs_[phys(logical) * obs_dim_]; }
  const T* next_obs_at(size_t logical) const { return &next_obs_[phys(logical) * obs_dim_]; }
  const T* action_at(size_t logical) const { return &actions_[phys(logical) * act_dim_]; }
  T reward_at(size_t logical) const { return rewards_[phys(logical)]; }

 private:
  size_t phys(size_t logical) const { return (start_ + logical) % capacity_; }

  size_t capacity_;
  int obs_dim_, act_dim_;
  std::vector<T> obs_, next_obs_, actions_, rewards_;
  std::vector<int64_t> ids_;
  size_t start_ = 0, size_ = 0;
  int64_t episode_ = -1;
};

}  // namespace dcwm
