#pragma once

#include <optional>
#include <vector>

#include "dcwm/agent.hpp"
#include "dcwm/mat.hpp"
#include "dcwm/rng.hpp"
#include "dcwm/world_model.hpp"

namespace dcwm {

struct MppiConfig {
  int horizon = 3;           // H; trajectories carry H+1 actions (the last one
                             // only feeds the terminal value)
  int iterations = 6;        // J
  int population = 512;      // Gaussian samples per iteration
  int prior_population = 24; // policy rollouts entered per iteration
  int elites = 64;           // K
  double min_std = 0.05;
  double max_std = 2.0;
  double temperature = 0.5;  // sharpening of the refit weights
  double plan_discount = 0.99;
  bool warm_start_std = false;  // carry std across env steps instead of
                                // resetting it to max_std
  bool argmax_action = false;   // deterministic final pick instead of the
                                // score-softmax draw

  void validate() const;  // throws ConfigError
};

// Diagonal Gaussian over open-loop action sequences a_0..a_H.
template <typename T>
struct PlanState {
  Mat<T> mean;  // (H+1) x act_dim
  Mat<T> std;   // (H+1) x act_dim, clamped to [min_std, max_std]
};

template <typename T>
PlanState<T> initial_plan_state(const MppiConfig& cfg, int act_dim);

// Warm start for the next environment step: mean rows shift up one step and
// the new final row is zero.  std resets to max_std unless warm_start_std
// carries the shifted values over.
template <typename T>
PlanState<T> warm_start_shift(const PlanState<T>& solved, const MppiConfig& cfg);

template <typename T>
struct TrajectoryScore {
  Mat<T> actions;  // (H+1) x act_dim
  T score = 0;     // discounted return estimate
  T weight = 0;    // exp(temperature * (score - best elite score)), in (0, 1]
};

// What the planner needs from a model.  Rows are independent trajectories;
// `step` returns the expected next state so rollouts are deterministic.
template <typename T>
class TrajectoryModel {
 public:
  virtual ~TrajectoryModel() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<T> action_low() const = 0;   // act_dim entries
  virtual std::vector<T> action_high() const = 0;
  virtual Mat<T> initial_state(const Mat<T>& obs) const = 0;              // 1 x state_dim
  virtual Mat<T> step(const Mat<T>& states, const Mat<T>& actions) const = 0;  // N x state_dim
  virtual Mat<T> reward(const Mat<T>& states, const Mat<T>& actions) const = 0;        // N x 1
  virtual Mat<T> terminal_value(const Mat<T>& states, const Mat<T>& actions) const = 0;  // N x 1
  virtual bool has_prior() const { return false; }
  virtual Mat<T> prior_action(const Mat<T>& states) const;  // N x act_dim; default throws
};

// The learned world model + agent behind the planner interface: states are
// code rows, `step` takes the probability-weighted average over the codebook,
// and the reward/value/policy heads see the configured encoding.
template <typename T>
class LearnedPlanModel : public TrajectoryModel<T> {
 public:
  LearnedPlanModel(const WorldModel<T>& wm, const Agent<T>& agent)
      : wm_(&wm), agent_(&agent) {}

  int state_dim() const override { return wm_->code_width(); }
  int action_dim() const override { return agent_->act_dim(); }
  std::vector<T> action_low() const override { return agent_->act_lo(); }
  std::vector<T> action_high() const override { return agent_->act_hi(); }
  Mat<T> initial_state(const Mat<T>& obs) const override { return wm_->encode_codes(obs); }
  Mat<T> step(const Mat<T>& states, const Mat<T>& actions) const override;
  Mat<T> reward(const Mat<T>& states, const Mat<T>& actions) const override;
  Mat<T> terminal_value(const Mat<T>& states, const Mat<T>& actions) const override;
  bool has_prior() const override { return true; }
  Mat<T> prior_action(const Mat<T>& states) const override;

 private:
  const WorldModel<T>* wm_;
  const Agent<T>* agent_;
};

// Discounted return estimate per trajectory:
//   Phi = sum_{h<H} gamma^h R(s_h, a_h) + gamma^H V(s_H, a_H)
// with s_{h+1} = step(s_h, a_h) from the shared start state.  step_actions
// holds one N x act_dim matrix per step h = 0..H.  Trajectories that touch a
// non-finite model output score -infinity.
template <typename T>
std::vector<T> evaluate_trajectories(const TrajectoryModel<T>& model, const Mat<T>& s0,
                                     const std::vector<Mat<T>>& step_actions, T discount);

// Importance-weighted refit of the search distribution to the elites; fills
// each elite's weight in place.  Variance is taken around the new mean and
// std is clamped to [min_std, max_std].
template <typename T>
PlanState<T> refit(std::vector<TrajectoryScore<T>>& elite, const MppiConfig& cfg);

template <typename T>
struct PlanTraceRow {
  int iteration = 0;
  T best_score = 0;
  T mean_score = 0;       // over finite candidate scores
  std::vector<T> mean0;   // first-step mean after the refit
};

template <typename T>
struct PlanResult {
  Mat<T> action;        // 1 x act_dim, exploration noise applied when training
  PlanState<T> solved;  // final search distribution
  PlanState<T> next;    // warm start for the next step
  T best_score = 0;
};

// One full planning call: J rounds of {sample population + prior rollouts +
// re-injected previous best, evaluate, top-K, refit}, then draw the returned
// action from the softmax over the last round's elite scores (argmax_action
// takes the best instead).  When training, Gaussian noise of scale noise_std
// is added and the result clipped to the action bounds.
template <typename T>
PlanResult<T> plan(const TrajectoryModel<T>& model, const Mat<T>& obs,
                   const PlanState<T>& warm, const MppiConfig& cfg, bool training,
                   T noise_std, Rng& rng, std::vector<PlanTraceRow<T>>* trace = nullptr);

}  // namespace dcwm
