#include "dcwm/envs.hpp"

#include <algorithm>
#include <cmath>

#include "dcwm/errors.hpp"
#include "dcwm/rng.hpp"

namespace dcwm {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDt = 0.05;
constexpr double kMaxSpeed = 8.0;
constexpr double kTorqueScale = 2.0;
constexpr double kCostBound = 16.27;
constexpr double kDamping = 0.95;
constexpr int kActionRepeat = 2;

std::vector<double> clipped(const std::vector<double>& a, const EnvSpec& spec) {
  if (static_cast<int>(a.size()) != spec.act_dim)
    throw DimensionError("env action size mismatch");
  std::vector<double> out(a.size());
  for (size_t i = 0; i < a.size(); ++i)
    out[i] = std::clamp(a[i], spec.action_low[i], spec.action_high[i]);
  return out;
}

}  // namespace

double wrap_angle(double x) {
  double w = std::fmod(x + kPi, 2 * kPi);
  if (w <= 0) w += 2 * kPi;
  return w - kPi;
}

PendulumState pendulum_substep(PendulumState s, double u) {
  const double accel = 15.0 * std::sin(s.theta) + 3.0 * kTorqueScale * u;
  s.theta_dot = std::clamp(s.theta_dot + kDt * accel, -kMaxSpeed, kMaxSpeed);
  s.theta += kDt * s.theta_dot;
  return s;
}

double pendulum_substep_reward(const PendulumState& s, double u) {
  const double th = wrap_angle(s.theta);
  const double torque = kTorqueScale * u;
  const double cost = th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * torque * torque;
  // The cost bound is fractionally below the true maximum (pi^2 + 6.4 +
  // 0.004), so clamp to keep the documented (0, 1] range airtight.
  return std::clamp((kCostBound - cost) / kCostBound, 1e-12, 1.0);
}

std::vector<double> pendulum_obs(const PendulumState& s) {
  return {std::cos(s.theta), std::sin(s.theta), s.theta_dot / kMaxSpeed};
}

std::vector<double> PendulumSwingup::reset(uint64_t seed) {
  Rng rng(seed);
  state_.theta = rng.uniform(-kPi, kPi);
  state_.theta_dot = rng.uniform(-1.0, 1.0);
  steps_ = 0;
  live_ = true;
  return pendulum_obs(state_);
}

Env::StepResult PendulumSwingup::step(const std::vector<double>& action) {
  if (!live_) throw ContractError("PendulumSwingup::step on a finished episode");
  const double u = clipped(action, spec_)[0];
  double reward = 0;
  for (int k = 0; k < spec_.action_repeat; ++k) {
    reward += pendulum_substep_reward(state_, u);
    state_ = pendulum_substep(state_, u);
  }
  reward /= spec_.action_repeat;
  ++steps_;
  if (steps_ >= spec_.max_episode_steps) live_ = false;
  return {pendulum_obs(state_), reward, steps_, !live_};
}

PointMassState point_mass_substep(PointMassState s, double fx, double fy) {
  s.vx = kDamping * s.vx + kDt * fx;
  s.vy = kDamping * s.vy + kDt * fy;
  s.x = std::clamp(s.x + kDt * s.vx, 0.0, 1.0);
  s.y = std::clamp(s.y + kDt * s.vy, 0.0, 1.0);
  return s;
}

double point_mass_substep_reward(const PointMassState& s) {
  const double dx = s.x - 0.5;
  const double dy = s.y - 0.5;
  return std::exp(-4.0 * std::sqrt(dx * dx + dy * dy));
}

std::vector<double> point_mass_obs(const PointMassState& s) { return {s.x, s.y, s.vx, s.vy}; }

std::vector<double> PointMassReach::reset(uint64_t seed) {
  Rng rng(seed);
  state_.x = rng.uniform();
  state_.y = rng.uniform();
  state_.vx = 0;
  state_.vy = 0;
  steps_ = 0;
  live_ = true;
  return point_mass_obs(state_);
}

Env::StepResult PointMassReach::step(const std::vector<double>& action) {
  if (!live_) throw ContractError("PointMassReach::step on a finished episode");
  const std::vector<double> f = clipped(action, spec_);
  double reward = 0;
  for (int k = 0; k < spec_.action_repeat; ++k) {
    reward += point_mass_substep_reward(state_);
    state_ = point_mass_substep(state_, f[0], f[1]);
  }
  reward /= spec_.action_repeat;
  ++steps_;
  if (steps_ >= spec_.max_episode_steps) live_ = false;
  return {point_mass_obs(state_), reward, steps_, !live_};
}

// --- oracle models --------------------------------------------------------

Mat<double> PendulumOracle::initial_state(const Mat<double>& obs) const {
  require_shape(obs, 1, 3, "pendulum oracle obs");
  Mat<double> s(1, 2);
  s.at(0, 0) = std::atan2(obs.at(0, 1), obs.at(0, 0));
  s.at(0, 1) = obs.at(0, 2) * kMaxSpeed;
  return s;
}

Mat<double> PendulumOracle::step(const Mat<double>& states, const Mat<double>& actions) const {
  Mat<double> out(states.rows, 2);
  for (int i = 0; i < states.rows; ++i) {
    PendulumState s{states.at(i, 0), states.at(i, 1)};
    for (int k = 0; k < kActionRepeat; ++k) s = pendulum_substep(s, actions.at(i, 0));
    out.at(i, 0) = s.theta;
    out.at(i, 1) = s.theta_dot;
  }
  return out;
}

Mat<double> PendulumOracle::reward(const Mat<double>& states, const Mat<double>& actions) const {
  Mat<double> r(states.rows, 1);
  for (int i = 0; i < states.rows; ++i) {
    PendulumState s{states.at(i, 0), states.at(i, 1)};
    double sum = 0;
    for (int k = 0; k < kActionRepeat; ++k) {
      sum += pendulum_substep_reward(s, actions.at(i, 0));
      s = pendulum_substep(s, actions.at(i, 0));
    }
    r.at(i, 0) = sum / kActionRepeat;
  }
  return r;
}

Mat<double> PendulumOracle::terminal_value(const Mat<double>& states, const Mat<double>&) const {
  return Mat<double>(states.rows, 1);
}

Mat<double> PointMassOracle::initial_state(const Mat<double>& obs) const {
  require_shape(obs, 1, 4, "point-mass oracle obs");
  return obs;
}

Mat<double> PointMassOracle::step(const Mat<double>& states, const Mat<double>& actions) const {
  Mat<double> out(states.rows, 4);
  for (int i = 0; i < states.rows; ++i) {
    PointMassState s{states.at(i, 0), states.at(i, 1), states.at(i, 2), states.at(i, 3)};
    for (int k = 0; k < kActionRepeat; ++k)
      s = point_mass_substep(s, actions.at(i, 0), actions.at(i, 1));
    out.at(i, 0) = s.x;
    out.at(i, 1) = s.y;
    out.at(i, 2) = s.vx;
    out.at(i, 3) = s.vy;
  }
  return out;
}

Mat<double> PointMassOracle::reward(const Mat<double>& states, const Mat<double>& actions) const {
  Mat<double> r(states.rows, 1);
  for (int i = 0; i < states.rows; ++i) {
    PointMassState s{states.at(i, 0), states.at(i, 1), states.at(i, 2), states.at(i, 3)};
    double sum = 0;
    for (int k = 0; k < kActionRepeat; ++k) {
      sum += point_mass_substep_reward(s);
      s = point_mass_substep(s, actions.at(i, 0), actions.at(i, 1));
    }
    r.at(i, 0) = sum / kActionRepeat;
  }
  return r;
}

Mat<double> PointMassOracle::terminal_value(const Mat<double>& states, const Mat<double>&) const {
  return Mat<double>(states.rows, 1);
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "pendulum") return std::make_unique<PendulumSwingup>();
  if (name == "pointmass") return std::make_unique<PointMassReach>();
  throw ConfigError("unknown environment: " + name);
}

std::unique_ptr<TrajectoryModel<double>> make_oracle_model(const std::string& name) {
  if (name == "pendulum") return std::make_unique<PendulumOracle>();
  if (name == "pointmass") return std::make_unique<PointMassOracle>();
  throw ConfigError("unknown environment: " + name);
}

std::vector<std::string> env_names() { return {"pendulum", "pointmass"}; }

}  // namespace dcwm
