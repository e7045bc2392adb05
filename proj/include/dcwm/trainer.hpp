#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dcwm/checkpoint.hpp"
#include "dcwm/config.hpp"

namespace dcwm {

// Injection points for tests and long-run babysitting.  All optional.
struct TrainHooks {
  // Seconds for the wall_clock_s metrics column.  Default: time since train()
  // began; inject a constant for byte-identical reruns.
  std::function<double()> clock;
  // Called after every evaluation; return true to stop training early.
  std::function<bool(int64_t episode, double eval_mean)> stop_after_eval;
  // Veto an upcoming scheduled evaluation (they are expensive); receives the
  // mean return of the last few collection episodes.
  std::function<bool(int64_t episode, double recent_train_return)> eval_gate;
  std::ostream* log = nullptr;  // per-episode progress lines
};

struct EvalResult {
  double mean = 0;
  double stddev = 0;
  std::vector<double> returns;  // per-episode, raw rewards
};

struct TrainOutcome {
  int64_t episodes = 0;   // collected, warm-up included
  int64_t env_steps = 0;  // driver steps
  int64_t wm_updates = 0;
  int64_t critic_updates = 0;
  int64_t actor_updates = 0;
  double last_eval = std::numeric_limits<double>::quiet_NaN();
  double best_eval = std::numeric_limits<double>::quiet_NaN();
  bool stopped_early = false;
  std::string metrics_path;
  std::string checkpoint_path;
};

// Noise-free planning rollouts on fresh environment instances, deterministic
// in `seed`.  Never touches a replay buffer.
template <typename T>
EvalResult evaluate(const WorldModel<T>& wm, const Agent<T>& agent, const RunConfig& cfg,
                    uint64_t seed, int episodes);

// The full training loop: N_random random-policy episodes, then per episode
// one planner-driven collection pass followed by T*utd update iterations
// (world model + critic every iteration, actor every actor_period-th, EMA
// always).  Metrics land in out_dir/metrics.csv, the final checkpoint in
// out_dir/checkpoint.ckpt.  Three consecutive non-finite update steps abort
// with NumericalError after writing out_dir/diagnostic.ckpt.
template <typename T>
TrainOutcome train(const RunConfig& cfg, const std::string& out_dir,
                   const TrainHooks& hooks = {});

// Dispatches on cfg.precision.
TrainOutcome train_any(const RunConfig& cfg, const std::string& out_dir,
                       const TrainHooks& hooks = {});

}  // namespace dcwm
