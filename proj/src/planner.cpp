#include "dcwm/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dcwm/errors.hpp"

namespace dcwm {

void MppiConfig::validate() const {
  if (horizon < 0) throw ConfigError("mppi: horizon must be >= 0");
  if (iterations < 1) throw ConfigError("mppi: iterations must be >= 1");
  if (population < 1) throw ConfigError("mppi: population must be >= 1");
  if (prior_population < 0) throw ConfigError("mppi: prior_population must be >= 0");
  if (elites < 1) throw ConfigError("mppi: elites must be >= 1");
  if (elites > population + prior_population)
    throw ConfigError("mppi: elites must not exceed population + prior_population");
  if (!(min_std > 0) || !(min_std <= max_std))
    throw ConfigError("mppi: need 0 < min_std <= max_std");
  if (!(temperature > 0)) throw ConfigError("mppi: temperature must be > 0");
  if (!(plan_discount > 0) || plan_discount > 1)
    throw ConfigError("mppi: plan_discount must be in (0, 1]");
}

template <typename T>
PlanState<T> initial_plan_state(const MppiConfig& cfg, int act_dim) {
  PlanState<T> s;
  s.mean = Mat<T>(cfg.horizon + 1, act_dim);
  s.std = Mat<T>(cfg.horizon + 1, act_dim, static_cast<T>(cfg.max_std));
  return s;
}

template <typename T>
PlanState<T> warm_start_shift(const PlanState<T>& solved, const MppiConfig& cfg) {
  const int rows = solved.mean.rows;
  const int cols = solved.mean.cols;
  PlanState<T> out;
  out.mean = Mat<T>(rows, cols);
  out.std = Mat<T>(rows, cols, static_cast<T>(cfg.max_std));
  for (int r = 0; r + 1 < rows; ++r) {
    std::copy(solved.mean.row(r + 1), solved.mean.row(r + 1) + cols, out.mean.row(r));
    if (cfg.warm_start_std)
      std::copy(solved.std.row(r + 1), solved.std.row(r + 1) + cols, out.std.row(r));
  }
  return out;
}

template <typename T>
Mat<T> TrajectoryModel<T>::prior_action(const Mat<T>&) const {
  throw ContractError("this trajectory model has no action prior");
}

template <typename T>
Mat<T> LearnedPlanModel<T>::step(const Mat<T>& states, const Mat<T>& actions) const {
  const int d = wm_->config().latent_dim;
  const int k = wm_->codebook().size();
  Mat<T> logits = wm_->dynamics_logits(states, actions);  // N x (d*k)
  require_shape(logits, states.rows, d * k, "planner dynamics logits");
  // Row-major N x (d*k) re-reads as (N*d) x k: per-dimension softmax in place.
  Mat<T> probs(states.rows * d, k);
  probs.data = std::move(logits.data);
  for (int r = 0; r < probs.rows; ++r) {
    T* p = probs.row(r);
    T m = p[0];
    for (int c = 1; c < k; ++c) m = std::max(m, p[c]);
    T z = 0;
    for (int c = 0; c < k; ++c) {
      p[c] = std::exp(p[c] - m);
      z += p[c];
    }
    for (int c = 0; c < k; ++c) p[c] /= z;
  }
  return expected_code(wm_->codebook(), probs, states.rows, d);
}

template <typename T>
Mat<T> LearnedPlanModel<T>::reward(const Mat<T>& states, const Mat<T>& actions) const {
  return wm_->reward_predict(wm_->apply_encoding(states), actions);
}

template <typename T>
Mat<T> LearnedPlanModel<T>::terminal_value(const Mat<T>& states, const Mat<T>& actions) const {
  return agent_->critic_mean(wm_->apply_encoding(states), actions);
}

template <typename T>
Mat<T> LearnedPlanModel<T>::prior_action(const Mat<T>& states) const {
  return agent_->policy_actions(wm_->apply_encoding(states));
}

namespace {

template <typename T>
void mark_non_finite_rows(const Mat<T>& m, std::vector<char>& bad) {
  for (int r = 0; r < m.rows; ++r) {
    if (bad[r]) continue;
    const T* p = m.row(r);
    for (int c = 0; c < m.cols; ++c) {
      if (!std::isfinite(static_cast<double>(p[c]))) {
        bad[r] = 1;
        break;
      }
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> evaluate_trajectories(const TrajectoryModel<T>& model, const Mat<T>& s0,
                                     const std::vector<Mat<T>>& step_actions, T discount) {
  if (step_actions.empty()) throw ContractError("evaluate_trajectories: no action steps");
  const int steps = static_cast<int>(step_actions.size());  // H+1
  const int n = step_actions[0].rows;
  const int act_dim = model.action_dim();
  require_shape(s0, 1, model.state_dim(), "evaluate_trajectories start state");
  for (int h = 0; h < steps; ++h)
    require_shape(step_actions[h], n, act_dim, "evaluate_trajectories actions");

  Mat<T> states(n, s0.cols);
  for (int r = 0; r < n; ++r) std::copy(s0.row(0), s0.row(0) + s0.cols, states.row(r));

  std::vector<double> phi(n, 0.0);
  std::vector<char> bad(n, 0);
  double g = 1.0;
  for (int h = 0; h + 1 < steps; ++h) {
    Mat<T> r = model.reward(states, step_actions[h]);
    require_shape(r, n, 1, "trajectory reward");
    mark_non_finite_rows(r, bad);
    for (int i = 0; i < n; ++i) phi[i] += g * static_cast<double>(r.at(i, 0));
    states = model.step(states, step_actions[h]);
    require_shape(states, n, model.state_dim(), "trajectory next state");
    mark_non_finite_rows(states, bad);
    g *= static_cast<double>(discount);
  }
  Mat<T> v = model.terminal_value(states, step_actions[steps - 1]);
  require_shape(v, n, 1, "trajectory terminal value");
  mark_non_finite_rows(v, bad);
  for (int i = 0; i < n; ++i) phi[i] += g * static_cast<double>(v.at(i, 0));

  std::vector<T> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = (bad[i] || !std::isfinite(phi[i])) ? -std::numeric_limits<T>::infinity()
                                                : static_cast<T>(phi[i]);
  return out;
}

template <typename T>
PlanState<T> refit(std::vector<TrajectoryScore<T>>& elite, const MppiConfig& cfg) {
  if (elite.empty()) throw ContractError("refit: no elites");
  const int rows = elite[0].actions.rows;
  const int cols = elite[0].actions.cols;

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : elite) best = std::max(best, static_cast<double>(e.score));
  double wsum = 0;
  for (auto& e : elite) {
    const double w = std::exp(cfg.temperature * (static_cast<double>(e.score) - best));
    e.weight = static_cast<T>(w);
    wsum += w;
  }

  PlanState<T> out;
  out.mean = Mat<T>(rows, cols);
  out.std = Mat<T>(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double mu = 0;
      for (const auto& e : elite)
        mu += static_cast<double>(e.weight) * static_cast<double>(e.actions.at(r, c));
      mu /= wsum;
      double var = 0;
      for (const auto& e : elite) {
        const double d = static_cast<double>(e.actions.at(r, c)) - mu;
        var += static_cast<double>(e.weight) * d * d;
      }
      var /= wsum;
      out.mean.at(r, c) = static_cast<T>(mu);
      out.std.at(r, c) =
          static_cast<T>(std::clamp(std::sqrt(var), cfg.min_std, cfg.max_std));
    }
  }
  return out;
}

template <typename T>
PlanResult<T> plan(const TrajectoryModel<T>& model, const Mat<T>& obs,
                   const PlanState<T>& warm, const MppiConfig& cfg, bool training,
                   T noise_std, Rng& rng, std::vector<PlanTraceRow<T>>* trace) {
  cfg.validate();
  const int act_dim = model.action_dim();
  const int steps = cfg.horizon + 1;
  require_shape(warm.mean, steps, act_dim, "plan warm-start mean");
  require_shape(warm.std, steps, act_dim, "plan warm-start std");
  const std::vector<T> lo = model.action_low();
  const std::vector<T> hi = model.action_high();

  const Mat<T> s0 = model.initial_state(obs);

  // A deterministic prior plus expected-state transitions make every prior
  // rollout identical, so the rollout is computed once and entered
  // prior_population times.
  std::vector<Mat<T>> prior;
  if (model.has_prior() && cfg.prior_population > 0) {
    prior.reserve(steps);
    Mat<T> s = s0;
    for (int h = 0; h < steps; ++h) {
      Mat<T> a = model.prior_action(s);
      require_shape(a, 1, act_dim, "prior action");
      prior.push_back(a);
      if (h + 1 < steps) s = model.step(s, prior.back());
    }
  }
  const int n_prior = prior.empty() ? 0 : cfg.prior_population;

  PlanState<T> cur = warm;
  std::vector<TrajectoryScore<T>> elite;
  std::optional<TrajectoryScore<T>> best_prev;

  for (int j = 0; j < cfg.iterations; ++j) {
    const int n = cfg.population + n_prior + (best_prev ? 1 : 0);
    std::vector<Mat<T>> step_actions(steps, Mat<T>(n, act_dim));
    for (int i = 0; i < cfg.population; ++i) {
      for (int h = 0; h < steps; ++h) {
        for (int c = 0; c < act_dim; ++c) {
          const T a = static_cast<T>(
              rng.normal(cur.mean.at(h, c), cur.std.at(h, c)));
          step_actions[h].at(i, c) = std::clamp(a, lo[c], hi[c]);
        }
      }
    }
    for (int i = 0; i < n_prior; ++i)
      for (int h = 0; h < steps; ++h)
        std::copy(prior[h].row(0), prior[h].row(0) + act_dim,
                  step_actions[h].row(cfg.population + i));
    if (best_prev)
      for (int h = 0; h < steps; ++h)
        std::copy(best_prev->actions.row(h), best_prev->actions.row(h) + act_dim,
                  step_actions[h].row(n - 1));

    const std::vector<T> phi =
        evaluate_trajectories(model, s0, step_actions, static_cast<T>(cfg.plan_discount));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&phi](int a, int b) {
      if (phi[a] != phi[b]) return phi[a] > phi[b];
      return a < b;
    });
    int n_finite = 0;
    double phi_sum = 0;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(static_cast<double>(phi[i]))) {
        ++n_finite;
        phi_sum += static_cast<double>(phi[i]);
      }
    }
    if (n_finite == 0)
      throw NumericalError("planner: every candidate trajectory scored non-finite");
    const int k_take = std::min(cfg.elites, n_finite);

    elite.clear();
    elite.reserve(k_take);
    for (int e = 0; e < k_take; ++e) {
      const int idx = order[e];
      TrajectoryScore<T> ts;
      ts.actions = Mat<T>(steps, act_dim);
      for (int h = 0; h < steps; ++h)
        std::copy(step_actions[h].row(idx), step_actions[h].row(idx) + act_dim,
                  ts.actions.row(h));
      ts.score = phi[idx];
      elite.push_back(std::move(ts));
    }
    cur = refit(elite, cfg);
    best_prev = elite[0];

    if (trace) {
      PlanTraceRow<T> row;
      row.iteration = j;
      row.best_score = elite[0].score;
      row.mean_score = static_cast<T>(phi_sum / n_finite);
      row.mean0.assign(cur.mean.row(0), cur.mean.row(0) + act_dim);
      trace->push_back(std::move(row));
    }
  }

  // Final pick over the last round's elites (sorted best-first).
  int pick = 0;
  if (!cfg.argmax_action) {
    const double top = static_cast<double>(elite[0].score);
    std::vector<double> p(elite.size());
    double z = 0;
    for (size_t i = 0; i < elite.size(); ++i) {
      p[i] = std::exp(static_cast<double>(elite[i].score) - top);
      z += p[i];
    }
    double u = rng.uniform() * z;
    for (size_t i = 0; i < elite.size(); ++i) {
      u -= p[i];
      if (u <= 0) {
        pick = static_cast<int>(i);
        break;
      }
      if (i + 1 == elite.size()) pick = static_cast<int>(i);
    }
  }

  PlanResult<T> out;
  out.action = Mat<T>(1, act_dim);
  std::copy(elite[pick].actions.row(0), elite[pick].actions.row(0) + act_dim,
            out.action.row(0));
  if (training && noise_std > 0) {
    for (int c = 0; c < act_dim; ++c) {
      out.action.at(0, c) = std::clamp(
          static_cast<T>(out.action.at(0, c) + rng.normal(0.0, noise_std)), lo[c], hi[c]);
    }
  }
  out.best_score = elite[0].score;
  out.solved = std::move(cur);
  out.next = warm_start_shift(out.solved, cfg);
  return out;
}

template PlanState<float> initial_plan_state<float>(const MppiConfig&, int);
template PlanState<double> initial_plan_state<double>(const MppiConfig&, int);
template PlanState<float> warm_start_shift<float>(const PlanState<float>&, const MppiConfig&);
template PlanState<double> warm_start_shift<double>(const PlanState<double>&, const MppiConfig&);
template class TrajectoryModel<float>;
template class TrajectoryModel<double>;
template class LearnedPlanModel<float>;
template class LearnedPlanModel<double>;
template std::vector<float> evaluate_trajectories<float>(const TrajectoryModel<float>&,
                                                         const Mat<float>&,
                                                         const std::vector<Mat<float>>&, float);
template std::vector<double> evaluate_trajectories<double>(const TrajectoryModel<double>&,
                                                           const Mat<double>&,
                                                           const std::vector<Mat<double>>&,
                                                           double);
template PlanState<float> refit<float>(std::vector<TrajectoryScore<float>>&, const MppiConfig&);
template PlanState<double> refit<double>(std::vector<TrajectoryScore<double>>&,
                                         const MppiConfig&);
template PlanResult<float> plan<float>(const TrajectoryModel<float>&, const Mat<float>&,
                                       const PlanState<float>&, const MppiConfig&, bool, float,
                                       Rng&, std::vector<PlanTraceRow<float>>*);
template PlanResult<double> plan<double>(const TrajectoryModel<double>&, const Mat<double>&,
                                         const PlanState<double>&, const MppiConfig&, bool,
                                         double, Rng&, std::vector<PlanTraceRow<double>>*);

}  // namespace dcwm
