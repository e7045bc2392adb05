#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "dcwm/planner.hpp"

namespace dcwm {

struct EnvSpec {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<double> action_low, action_high;
  int max_episode_steps = 100;  // driver steps per episode
  int action_repeat = 2;        // simulator substeps per driver step
};

// Analytic toy environment.  step() clips the action to bounds, advances the
// simulator action_repeat times and reports the mean substep reward, so the
// documented per-step reward range holds for driver steps too.
class Env {
 public:
  struct StepResult {
    std::vector<double> obs;
    double reward = 0;
    int step_index = 0;  // driver steps taken so far this episode
    bool done = false;
  };

  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;
};

// Wrap an angle into (-pi, pi].
double wrap_angle(double x);

// --- pendulum swing-up -------------------------------------------------
// theta = 0 is upright (unstable); gravity accelerates the pole away from
// it.  Control is a torque 2u for u in [-1, 1].  Semi-implicit Euler with
// dt = 0.05 and the angular velocity clipped to +-8.
struct PendulumState {
  double theta = 0;
  double theta_dot = 0;
};

PendulumState pendulum_substep(PendulumState s, double u);
// -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 (2u)^2), rescaled by the cost
// bound 16.27 into (0, 1].
double pendulum_substep_reward(const PendulumState& s, double u);
std::vector<double> pendulum_obs(const PendulumState& s);  // cos, sin, theta_dot/8

class PendulumSwingup : public Env {
 public:
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;

  void set_state(const PendulumState& s) { state_ = s; }
  const PendulumState& state() const { return state_; }

 private:
  EnvSpec spec_{3, 1, {-1}, {1}, 100, 2};
  PendulumState state_;
  int steps_ = 0;
  bool live_ = false;
};

// --- point-mass reach ---------------------------------------------------
// Double integrator on the unit box with velocity damping 0.95 per substep;
// the 2-D action is a force.  Reward exp(-4 * distance to (0.5, 0.5)).
struct PointMassState {
  double x = 0, y = 0, vx = 0, vy = 0;
};

PointMassState point_mass_substep(PointMassState s, double fx, double fy);
double point_mass_substep_reward(const PointMassState& s);
std::vector<double> point_mass_obs(const PointMassState& s);

class PointMassReach : public Env {
 public:
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> reset(uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;

  void set_state(const PointMassState& s) { state_ = s; }
  const PointMassState& state() const { return state_; }

 private:
  EnvSpec spec_{4, 2, {-1, -1}, {1, 1}, 100, 2};
  PointMassState state_;
  int steps_ = 0;
  bool live_ = false;
};

// --- true-dynamics planning models ---------------------------------------
// The real environment behind the planner interface, used for the
// expert-return baseline.  One model step is one driver step (action_repeat
// substeps, mean reward); the terminal value is zero since there is no
// value function for the true model.
class PendulumOracle : public TrajectoryModel<double> {
 public:
  int state_dim() const override { return 2; }  // theta, theta_dot
  int action_dim() const override { return 1; }
  std::vector<double> action_low() const override { return {-1}; }
  std::vector<double> action_high() const override { return {1}; }
  Mat<double> initial_state(const Mat<double>& obs) const override;
  Mat<double> step(const Mat<double>& states, const Mat<double>& actions) const override;
  Mat<double> reward(const Mat<double>& states, const Mat<double>& actions) const override;
  Mat<double> terminal_value(const Mat<double>& states, const Mat<double>& actions) const override;
};

class PointMassOracle : public TrajectoryModel<double> {
 public:
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  std::vector<double> action_low() const override { return {-1, -1}; }
  std::vector<double> action_high() const override { return {1, 1}; }
  Mat<double> initial_state(const Mat<double>& obs) const override;
  Mat<double> step(const Mat<double>& states, const Mat<double>& actions) const override;
  Mat<double> reward(const Mat<double>& states, const Mat<double>& actions) const override;
  Mat<double> terminal_value(const Mat<double>& states, const Mat<double>& actions) const override;
};

// Registry for the CLI; throws ConfigError for unknown names.
std::unique_ptr<Env> make_env(const std::string& name);
std::unique_ptr<TrajectoryModel<double>> make_oracle_model(const std::string& name);
std::vector<std::string> env_names();

// Sign-preserving magnitude compression and its inverse.
inline double symlog(double x) { return std::copysign(std::log1p(std::abs(x)), x); }
inline double symexp(double x) { return std::copysign(std::expm1(std::abs(x)), x); }

}  // namespace dcwm
