#include "dcwm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <ostream>

#include "dcwm/envs.hpp"
#include "dcwm/errors.hpp"
#include "dcwm/metrics.hpp"
#include "dcwm/planner.hpp"
#include "dcwm/replay.hpp"

namespace dcwm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename T>
Mat<T> row_mat(const std::vector<double>& v) {
  Mat<T> m(1, static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) m.data[i] = static_cast<T>(v[i]);
  return m;
}

template <typename T>
std::vector<double> first_row(const Mat<T>& m) {
  std::vector<double> v(m.cols);
  for (int c = 0; c < m.cols; ++c) v[c] = static_cast<double>(m.at(0, c));
  return v;
}

// Evaluation seeds hang off (run seed, episode) without consuming the
// training stream, so skipping an evaluation never shifts later draws.
uint64_t derived_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
void zero_all_grads(TrainerState<T>& st) {
  for (ParamBlock<T>* b : checkpoint_blocks(st)) b->zero_grad();
}

double mean_of(const std::deque<double>& xs) {
  if (xs.empty()) return kNaN;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

struct LossMeter {
  double sum = 0;
  int64_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : kNaN; }
};

}  // namespace

template <typename T>
EvalResult evaluate(const WorldModel<T>& wm, const Agent<T>& agent, const RunConfig& cfg,
                    uint64_t seed, int episodes) {
  if (episodes < 1) throw ContractError("evaluate needs episodes >= 1");
  LearnedPlanModel<T> model(wm, agent);
  auto env = make_env(cfg.env);
  const int act_dim = env->spec().act_dim;
  Rng rng(seed);

  EvalResult out;
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> obs = env->reset(rng.next_u64());
    PlanState<T> ps = initial_plan_state<T>(cfg.mppi, act_dim);
    double ret = 0;
    while (true) {
      PlanResult<T> pr =
          plan<T>(model, row_mat<T>(obs), ps, cfg.mppi, /*training=*/false, T(0), rng);
      ps = std::move(pr.next);
      auto sr = env->step(first_row(pr.action));
      ret += sr.reward;
      obs = std::move(sr.obs);
      if (sr.done) break;
    }
    out.returns.push_back(ret);
  }
  double s = 0, s2 = 0;
  for (double r : out.returns) s += r;
  out.mean = s / static_cast<double>(out.returns.size());
  for (double r : out.returns) s2 += (r - out.mean) * (r - out.mean);
  out.stddev = std::sqrt(s2 / static_cast<double>(out.returns.size()));
  return out;
}

template <typename T>
TrainOutcome train(const RunConfig& cfg, const std::string& out_dir, const TrainHooks& hooks) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  TrainHooks h = hooks;
  if (!h.clock) {
    const auto t0 = std::chrono::steady_clock::now();
    h.clock = [t0] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
  }

  Rng rng(cfg.seed);
  TrainerState<T> st = make_trainer_state<T>(cfg, rng);
  WorldModel<T>& wm = *st.wm;
  Agent<T>& agent = *st.agent;
  LearnedPlanModel<T> model(wm, agent);

  auto env = make_env(cfg.env);
  const EnvSpec& spec = env->spec();
  ReplayBuffer<T> buffer(cfg.buffer_capacity, spec.obs_dim, spec.act_dim);
  MetricsWriter metrics(out_dir + "/metrics.csv");

  AdamConfig model_opt;
  model_opt.lr = cfg.lr;
  AdamConfig encoder_opt;
  encoder_opt.lr = cfg.encoder_lr;

  const int window = std::max(cfg.wm_horizon, cfg.td.nstep);
  const int num_codes = wm.codebook().size();

  TrainOutcome outcome;
  outcome.metrics_path = out_dir + "/metrics.csv";
  outcome.checkpoint_path = out_dir + "/checkpoint.ckpt";

  auto save_state = [&](const std::string& path) {
    st.episode = outcome.episodes;
    st.env_step = outcome.env_steps;
    save_checkpoint(path, st);
  };

  std::deque<double> recent_returns;
  int consecutive_bad = 0;
  int64_t global_updates = 0;

  for (int64_t episode = 0; episode < cfg.episodes; ++episode) {
    const bool warmup = episode < cfg.random_episodes;
    const int64_t planner_index = episode - cfg.random_episodes;  // 0-based post-warm-up

    // --- collect one episode ---
    std::vector<double> obs = env->reset(rng.next_u64());
    PlanState<T> ps = initial_plan_state<T>(cfg.mppi, spec.act_dim);
    const double noise_std = cfg.noise.at(static_cast<int>(planner_index));
    buffer.begin_episode();
    double episodic_return = 0;
    int64_t steps = 0;
    while (true) {
      std::vector<double> action(spec.act_dim);
      if (warmup) {
        for (int c = 0; c < spec.act_dim; ++c)
          action[c] = rng.uniform(spec.action_low[c], spec.action_high[c]);
      } else {
        PlanResult<T> pr = plan<T>(model, row_mat<T>(obs), ps, cfg.mppi, /*training=*/true,
                                   static_cast<T>(noise_std), rng);
        ps = std::move(pr.next);
        action = first_row(pr.action);
      }
      auto sr = env->step(action);
      buffer.push(obs, action, sr.obs, cfg.symlog_rewards ? symlog(sr.reward) : sr.reward);
      episodic_return += sr.reward;
      ++steps;
      obs = std::move(sr.obs);
      if (sr.done) break;
    }
    outcome.env_steps += steps;
    outcome.episodes = episode + 1;
    recent_returns.push_back(episodic_return);
    if (recent_returns.size() > 3) recent_returns.pop_front();

    // --- update phase (post-warm-up episodes only) ---
    LossMeter wm_meter, critic_meter, actor_meter;
    std::vector<char> code_seen(num_codes, 0);
    if (!warmup) {
      const int64_t iterations = steps * cfg.utd;
      for (int64_t it = 0; it < iterations; ++it) {
        try {
          SampledBatch<T> sb = buffer.sample(cfg.batch_size, window, rng);

          // World model: multi-step latent consistency + reward.
          WmBatch<T> wb;
          wb.obs.assign(sb.obs.begin(), sb.obs.begin() + cfg.wm_horizon + 1);
          wb.actions.assign(sb.actions.begin(), sb.actions.begin() + cfg.wm_horizon);
          wb.rewards.assign(sb.rewards.begin(), sb.rewards.begin() + cfg.wm_horizon);
          RolloutTrace<T> tr = wm.build_loss(wb, &rng);
          if (!std::isfinite(static_cast<double>(tr.loss_value)))
            throw NumericalError("world-model loss is not finite");
          tr.graph.backward(tr.loss);
          adamw_step(wm.encoder_params(), encoder_opt);
          adamw_step(wm.dynamics_params(), model_opt);
          ++outcome.wm_updates;
          wm_meter.add(static_cast<double>(tr.loss_value));

          // Critic: N-step TD toward the subsampled target ensemble.
          const Mat<T> codes0 = wm.encode_codes(sb.obs[0]);
          const Mat<T> enc0 = wm.apply_encoding(codes0);
          const Mat<T> encN = wm.apply_encoding(wm.encode_codes(sb.obs[cfg.td.nstep]));
          Mat<T> nstep_reward(cfg.batch_size, 1);
          for (int b = 0; b < cfg.batch_size; ++b) {
            double acc = 0, g = 1;
            for (int i = 0; i < cfg.td.nstep; ++i) {
              acc += g * static_cast<double>(sb.rewards[i].at(b, 0));
              g *= cfg.td.discount;
            }
            nstep_reward.at(b, 0) = static_cast<T>(acc);
          }
          const Mat<T> y = agent.td_target(nstep_reward, encN, rng);
          LossTape<T> cl = agent.critic_loss(enc0, sb.actions[0], y);
          if (!std::isfinite(static_cast<double>(cl.value)))
            throw NumericalError("critic loss is not finite");
          cl.graph.backward(cl.loss);
          adamw_step(agent.critic_params(), model_opt);
          ++outcome.critic_updates;
          critic_meter.add(static_cast<double>(cl.value));

          ++global_updates;
          if (global_updates % cfg.actor_period == 0) {
            LossTape<T> al = agent.actor_loss(enc0, rng);
            if (!std::isfinite(static_cast<double>(al.value)))
              throw NumericalError("actor loss is not finite");
            al.graph.backward(al.loss);
            adamw_step(agent.policy_params(), model_opt);
            ++outcome.actor_updates;
            actor_meter.add(static_cast<double>(al.value));
          }
          agent.ema_update();

          for (int idx : indices_of_batch(wm.codebook(), codes0, cfg.wm.latent_dim))
            code_seen[idx] = 1;
          consecutive_bad = 0;
        } catch (const NumericalError& err) {
          zero_all_grads(st);
          ++consecutive_bad;
          if (h.log)
            *h.log << "episode " << episode << " update " << it << ": " << err.what()
                   << " (strike " << consecutive_bad << ")\n";
          if (consecutive_bad >= 3) {
            save_state(out_dir + "/diagnostic.ckpt");
            throw;
          }
        }
      }
    }

    // --- evaluation + logging ---
    MetricsRow row;
    row.env_step = outcome.env_steps;
    row.episode = episode;
    row.episodic_return = episodic_return;
    row.loss_world = wm_meter.mean();
    row.loss_critic = critic_meter.mean();
    row.loss_actor = actor_meter.mean();
    if (!warmup) {
      int active = 0;
      for (char s : code_seen) active += s;
      row.active_code_fraction = static_cast<double>(active) / num_codes;
    }

    const bool eval_due =
        !warmup && ((planner_index + 1) % cfg.eval_every == 0 || episode == cfg.episodes - 1);
    bool stop = false;
    if (eval_due &&
        (!h.eval_gate || h.eval_gate(episode, mean_of(recent_returns)))) {
      const EvalResult ev = evaluate(wm, agent, cfg, derived_seed(cfg.seed, episode),
                                     cfg.eval_episodes);
      row.eval_return_mean = ev.mean;
      outcome.last_eval = ev.mean;
      if (std::isnan(outcome.best_eval) || ev.mean > outcome.best_eval)
        outcome.best_eval = ev.mean;
      if (h.stop_after_eval && h.stop_after_eval(episode, ev.mean)) stop = true;
    }
    row.wall_clock_s = h.clock();
    metrics.append(row);
    if (h.log) {
      *h.log << "episode " << episode << " return " << episodic_return;
      if (!std::isnan(row.eval_return_mean)) *h.log << " eval " << row.eval_return_mean;
      if (!std::isnan(row.loss_world))
        *h.log << " wm " << row.loss_world << " critic " << row.loss_critic;
      *h.log << "\n";
      h.log->flush();
    }

    if (cfg.checkpoint_every > 0 && !warmup && (planner_index + 1) % cfg.checkpoint_every == 0)
      save_state(outcome.checkpoint_path);
    if (stop) {
      outcome.stopped_early = true;
      break;
    }
  }

  save_state(outcome.checkpoint_path);
  return outcome;
}

TrainOutcome train_any(const RunConfig& cfg, const std::string& out_dir,
                       const TrainHooks& hooks) {
  if (cfg.precision == "double") return train<double>(cfg, out_dir, hooks);
  return train<float>(cfg, out_dir, hooks);
}

template EvalResult evaluate<float>(const WorldModel<float>&, const Agent<float>&,
                                    const RunConfig&, uint64_t, int);
template EvalResult evaluate<double>(const WorldModel<double>&, const Agent<double>&,
                                     const RunConfig&, uint64_t, int);
template TrainOutcome train<float>(const RunConfig&, const std::string&, const TrainHooks&);
template TrainOutcome train<double>(const RunConfig&, const std::string&, const TrainHooks&);

}  // namespace dcwm
