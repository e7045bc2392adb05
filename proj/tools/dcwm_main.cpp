#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dcwm/checkpoint.hpp"
#include "dcwm/envs.hpp"
#include "dcwm/errors.hpp"
#include "dcwm/fsq.hpp"
#include "dcwm/metrics.hpp"
#include "dcwm/planner.hpp"
#include "dcwm/trainer.hpp"

namespace fs = std::filesystem;
using namespace dcwm;

namespace {

struct EvalArgs {
  std::string checkpoint;
  int episodes = 10;
  uint64_t seed = 0;
  std::string trace_path;  // optional per-iteration planner trace CSV
};

template <typename T>
int run_eval(const EvalArgs& args) {
  TrainerState<T> st = load_checkpoint<T>(args.checkpoint);

  if (!args.trace_path.empty()) {
    // Trace one noise-free planning call from a fresh reset.
    LearnedPlanModel<T> model(*st.wm, *st.agent);
    auto env = make_env(st.cfg.env);
    const std::vector<double> obs = env->reset(args.seed);
    Mat<T> obs_mat(1, static_cast<int>(obs.size()));
    for (size_t i = 0; i < obs.size(); ++i) obs_mat.data[i] = static_cast<T>(obs[i]);
    Rng rng(args.seed);
    std::vector<PlanTraceRow<T>> trace;
    plan<T>(model, obs_mat, initial_plan_state<T>(st.cfg.mppi, env->spec().act_dim), st.cfg.mppi,
            /*training=*/false, T(0), rng, &trace);
    std::ofstream out(args.trace_path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write plan trace: " + args.trace_path);
    out << "iteration,best_score,mean_score,mu_0\n";
    for (const auto& row : trace) {
      out << row.iteration << ',' << row.best_score << ',' << row.mean_score << ',';
      for (size_t c = 0; c < row.mean0.size(); ++c) out << (c ? ";" : "") << row.mean0[c];
      out << '\n';
    }
    std::cout << "plan trace -> " << args.trace_path << "\n";
  }

  const EvalResult ev = evaluate(*st.wm, *st.agent, st.cfg, args.seed, args.episodes);
  for (size_t i = 0; i < ev.returns.size(); ++i)
    std::cout << "episode " << i << ": return " << ev.returns[i] << "\n";
  std::cout << "mean " << ev.mean << " stddev " << ev.stddev << " over " << args.episodes
            << " episodes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-codebook world model: train, evaluate, plot, inspect"};
  app.require_subcommand(1);

  std::string config_path, train_out = "run";
  int64_t seed_override = -1;
  bool fixed_clock = false;
  auto* train_cmd = app.add_subcommand("train", "Run the training loop from a config file");
  train_cmd->add_option("--config", config_path, "key = value config file")->required();
  train_cmd->add_option("--seed", seed_override, "override the config's seed");
  train_cmd->add_option("--out", train_out, "output directory for metrics and checkpoints");
  train_cmd->add_flag("--fixed-clock", fixed_clock,
                      "log wall_clock_s as 0 so reruns are byte-identical");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with noise-free planning");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--episodes", eval_args.episodes, "evaluation episodes")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_args.seed, "evaluation seed");
  eval_cmd->add_option("--plan-trace", eval_args.trace_path,
                       "write one planning call's per-iteration trace CSV here");

  std::string metrics_path, plot_dir;
  auto* plot_cmd = app.add_subcommand("plot", "Render SVG charts from a metrics CSV");
  plot_cmd->add_option("--metrics", metrics_path, "metrics CSV")->required();
  plot_cmd->add_option("--out", plot_dir, "chart directory (default: next to the CSV)");

  std::string levels_str = "5,3", codebook_out;
  auto* dump_cmd = app.add_subcommand("dump-codebook", "Write the FSQ code table as CSV");
  dump_cmd->add_option("--levels", levels_str, "comma-separated quantization levels");
  dump_cmd->add_option("--out", codebook_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad usage is a config error
  }

  try {
    if (*train_cmd) {
      RunConfig cfg = load_run_config(config_path);
      if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
      TrainHooks hooks;
      hooks.log = &std::cerr;
      if (fixed_clock) hooks.clock = [] { return 0.0; };
      const TrainOutcome out = train_any(cfg, train_out, hooks);
      std::cout << "episodes " << out.episodes << " env_steps " << out.env_steps << "\n";
      std::cout << "updates: world " << out.wm_updates << " critic " << out.critic_updates
                << " actor " << out.actor_updates << "\n";
      if (!std::isnan(out.last_eval))
        std::cout << "eval: last " << out.last_eval << " best " << out.best_eval << "\n";
      std::cout << "metrics -> " << out.metrics_path << "\n";
      std::cout << "checkpoint -> " << out.checkpoint_path << "\n";
    } else if (*eval_cmd) {
      if (!fs::exists(eval_args.checkpoint))
        throw ConfigError("checkpoint not found: " + eval_args.checkpoint);
      if (checkpoint_precision(eval_args.checkpoint) == "double")
        return run_eval<double>(eval_args);
      return run_eval<float>(eval_args);
    } else if (*plot_cmd) {
      if (!fs::exists(metrics_path)) throw ConfigError("metrics file not found: " + metrics_path);
      if (plot_dir.empty()) {
        const fs::path parent = fs::path(metrics_path).parent_path();
        plot_dir = parent.empty() ? "." : parent.string();
      }
      emit_plots(metrics_path, plot_dir);
      std::cout << plot_dir << "/return.svg\n" << plot_dir << "/active_codes.svg\n";
    } else if (*dump_cmd) {
      std::vector<int> levels;
      std::stringstream ss(levels_str);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        try {
          levels.push_back(std::stoi(tok));
        } catch (const std::exception&) {
          throw ConfigError("bad level '" + tok + "' in --levels");
        }
      }
      if (levels.empty()) throw ConfigError("--levels needs at least one entry");
      for (int l : levels)
        if (l < 2) throw ConfigError("levels must all be >= 2");
      const Codebook<double> cb(levels);
      if (codebook_out.empty()) {
        std::cout << cb.to_csv();
      } else {
        std::ofstream out(codebook_out, std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + codebook_out);
        out << cb.to_csv();
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
