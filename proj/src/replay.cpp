#include "dcwm/replay.hpp"

#include <algorithm>

#include "dcwm/errors.hpp"

namespace dcwm {

template <typename T>
ReplayBuffer<T>::ReplayBuffer(size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity < 1 || obs_dim < 1 || act_dim < 1)
    throw ContractError("replay buffer needs positive capacity and dims");
  obs_.resize(capacity * obs_dim);
  next_obs_.resize(capacity * obs_dim);
  actions_.resize(capacity * act_dim);
  rewards_.resize(capacity);
  ids_.resize(capacity);
}

template <typename T>
void ReplayBuffer<T>::push(const std::vector<double>& obs, const std::vector<double>& action,
                           const std::vector<double>& next_obs, double reward) {
  if (episode_ < 0) throw ContractError("replay push before begin_episode");
  if (static_cast<int>(obs.size()) != obs_dim_ ||
      static_cast<int>(next_obs.size()) != obs_dim_ ||
      static_cast<int>(action.size()) != act_dim_)
    throw DimensionError("replay push size mismatch");

  size_t pos;
  if (size_ == capacity_) {
    pos = start_;
    start_ = (start_ + 1) % capacity_;
  } else {
    pos = (start_ + size_) % capacity_;
    ++size_;
  }
  for (int i = 0; i < obs_dim_; ++i) {
    obs_[pos * obs_dim_ + i] = static_cast<T>(obs[i]);
    next_obs_[pos * obs_dim_ + i] = static_cast<T>(next_obs[i]);
  }
  for (int i = 0; i < act_dim_; ++i) actions_[pos * act_dim_ + i] = static_cast<T>(action[i]);
  rewards_[pos] = static_cast<T>(reward);
  ids_[pos] = episode_;
}

template <typename T>
SampledBatch<T> ReplayBuffer<T>::sample(int batch, int window, Rng& rng) const {
  if (batch < 1 || window < 1) throw ContractError("replay sample needs batch, window >= 1");
  if (size_ < static_cast<size_t>(window))
    throw ContractError("replay sample: fewer transitions than the window length");

  SampledBatch<T> out;
  out.obs.assign(window + 1, Mat<T>(batch, obs_dim_));
  out.actions.assign(window, Mat<T>(batch, act_dim_));
  out.rewards.assign(window, Mat<T>(batch, 1));

  const size_t starts = size_ - window + 1;
  for (int b = 0; b < batch; ++b) {
    size_t k = 0;
    bool found = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      k = rng.below(starts);
      // Ids are non-decreasing in logical order, so equal endpoints mean the
      // whole window sits in one episode.
      if (episode_at(k) == episode_at(k + window - 1)) {
        found = true;
        break;
      }
    }
    if (!found)
      throw ContractError("replay sample: no stored episode spans the requested window");
    for (int h = 0; h < window; ++h) {
      std::copy(obs_at(k + h), obs_at(k + h) + obs_dim_, out.obs[h].row(b));
      std::copy(action_at(k + h), action_at(k + h) + act_dim_, out.actions[h].row(b));
      out.rewards[h].at(b, 0) = reward_at(k + h);
    }
    std::copy(next_obs_at(k + window - 1), next_obs_at(k + window - 1) + obs_dim_,
              out.obs[window].row(b));
  }
  return out;
}

template class ReplayBuffer<float>;
template class ReplayBuffer<double>;

}  // namespace dcwm
