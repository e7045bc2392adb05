#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dcwm/agent.hpp"
#include "dcwm/planner.hpp"
#include "dcwm/world_model.hpp"

namespace dcwm {

// Exploration-noise schedule: linear from `start` to `end` over the first
// `episodes` planner episodes, constant afterwards.
struct NoiseSchedule {
  double start = 1.0;
  double end = 0.1;
  int episodes = 20;

  double at(int episode) const;
};

// Everything one training run needs, with desk-scale defaults.  obs/act
// dimensions are filled in from the environment at build time and are not
// config keys.
struct RunConfig {
  std::string env = "pendulum";
  uint64_t seed = 0;
  int episodes = 150;          // total collected episodes, warm-up included
  int random_episodes = 10;    // uniform-random warm-up episodes
  int batch_size = 512;
  uint64_t buffer_capacity = 1000000;
  int utd = 1;                 // gradient updates per collected driver step
  int wm_horizon = 5;          // multi-step world-model training horizon
  int actor_period = 2;        // critic updates per actor update
  double lr = 3e-4;
  double encoder_lr = 1e-4;
  std::string precision = "float";  // float | double
  bool symlog_rewards = false;
  int eval_every = 10;         // planner episodes between evaluations
  int eval_episodes = 10;
  int checkpoint_every = 0;    // 0: final checkpoint only

  WorldModelConfig wm;   // latent_dim 32 desk default; set latent_dim=512 for paper scale
  TdConfig td;
  MppiConfig mppi;
  NoiseSchedule noise;

  void validate() const;  // throws ConfigError
};

// Flat `key = value` lines; '#' starts a comment; unknown keys are errors.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical (key, value) listing: feeding it back through apply_config_key
// reproduces the config exactly.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace dcwm
