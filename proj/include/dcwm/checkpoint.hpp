#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcwm/agent.hpp"
#include "dcwm/config.hpp"
#include "dcwm/world_model.hpp"

namespace dcwm {

// Full state of a training run: config, both networks, progress counters.
template <typename T>
struct TrainerState {
  RunConfig cfg;
  std::unique_ptr<WorldModel<T>> wm;
  std::unique_ptr<Agent<T>> agent;
  int64_t episode = 0;   // collected episodes so far
  int64_t env_step = 0;  // driver steps so far
};

// Fresh networks sized for cfg; obs/action dimensions come from the named
// environment.  `rng` drives weight init.
template <typename T>
TrainerState<T> make_trainer_state(const RunConfig& cfg, Rng& rng);

// Canonical parameter-block order used by the checkpoint payload: world model
// first, then live critics, target critics, policy, target policy.
template <typename T>
std::vector<ParamBlock<T>*> checkpoint_blocks(TrainerState<T>& st);

// File layout: a line-oriented text header (magic + precision, the config in
// canonical key order, counters, one descriptor line per block) followed by
// raw native-endian value/adam_m/adam_v arrays in block order.  Saving the
// same state twice produces byte-identical files.
template <typename T>
void save_checkpoint(const std::string& path, TrainerState<T>& st);

// Throws CheckpointVersionError on a foreign or mangled header,
// CheckpointShapeError when descriptors disagree with the rebuilt networks,
// CheckpointTruncatedError when the payload ends early.  Nothing is returned
// partially initialized.
template <typename T>
TrainerState<T> load_checkpoint(const std::string& path);

// Peeks at the magic line so callers can dispatch on the stored precision.
std::string checkpoint_precision(const std::string& path);

}  // namespace dcwm
