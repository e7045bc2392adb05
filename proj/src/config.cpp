#include "dcwm/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "dcwm/errors.hpp"
#include "dcwm/fsq.hpp"

namespace dcwm {

double NoiseSchedule::at(int episode) const {
  if (episodes <= 0 || episode >= episodes) return end;
  if (episode < 0) return start;
  return start + (end - start) * (static_cast<double>(episode) / episodes);
}

void RunConfig::validate() const {
  if (episodes < 1 || random_episodes < 0 || random_episodes > episodes)
    throw ConfigError("episodes must be >= 1 with 0 <= random_episodes <= episodes");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
  if (utd < 1) throw ConfigError("utd must be >= 1");
  if (wm_horizon < 1) throw ConfigError("wm_horizon must be >= 1");
  if (actor_period < 1) throw ConfigError("actor_period must be >= 1");
  if (!(lr > 0) || !(encoder_lr > 0)) throw ConfigError("learning rates must be > 0");
  if (precision != "float" && precision != "double")
    throw ConfigError("precision must be float or double");
  if (eval_every < 1 || eval_episodes < 1)
    throw ConfigError("eval_every and eval_episodes must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (wm.latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (wm.fsq_levels.empty()) throw ConfigError("fsq_levels must be non-empty");
  for (int l : wm.fsq_levels)
    if (l < 2) throw ConfigError("fsq levels must all be >= 2");
  if (td.nstep < 1 || td.num_q < 1 || td.subsample < 1 || td.subsample > td.num_q)
    throw ConfigError("td: need nstep >= 1 and 1 <= subsample <= num_q");
  mppi.validate();
  if (noise.episodes < 0) throw ConfigError("noise.episodes must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<int>(parse_int(key, trim(tok))));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "env") cfg.env = value;
  else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "episodes") cfg.episodes = static_cast<int>(parse_int(key, value));
  else if (key == "random_episodes") cfg.random_episodes = static_cast<int>(parse_int(key, value));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "buffer_capacity")
    cfg.buffer_capacity = static_cast<uint64_t>(parse_int(key, value));
  else if (key == "utd") cfg.utd = static_cast<int>(parse_int(key, value));
  else if (key == "wm_horizon") cfg.wm_horizon = static_cast<int>(parse_int(key, value));
  else if (key == "actor_period") cfg.actor_period = static_cast<int>(parse_int(key, value));
  else if (key == "lr") cfg.lr = parse_real(key, value);
  else if (key == "encoder_lr") cfg.encoder_lr = parse_real(key, value);
  else if (key == "precision") cfg.precision = value;
  else if (key == "symlog_rewards") cfg.symlog_rewards = parse_bool(key, value);
  else if (key == "eval_every") cfg.eval_every = static_cast<int>(parse_int(key, value));
  else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_int(key, value));
  else if (key == "checkpoint_every")
    cfg.checkpoint_every = static_cast<int>(parse_int(key, value));
  else if (key == "latent_dim") cfg.wm.latent_dim = static_cast<int>(parse_int(key, value));
  else if (key == "fsq_levels") cfg.wm.fsq_levels = parse_int_list(key, value);
  else if (key == "encoding") cfg.wm.encoding = parse_encoding(value);
  else if (key == "encoder_hidden") cfg.wm.encoder_hidden = parse_int_list(key, value);
  else if (key == "mlp_hidden") cfg.wm.mlp_hidden = parse_int_list(key, value);
  else if (key == "gs_tau") cfg.wm.gs_tau = parse_real(key, value);
  else if (key == "wm_discount") cfg.wm.discount = parse_real(key, value);
  else if (key == "discount") cfg.td.discount = parse_real(key, value);
  else if (key == "nstep") cfg.td.nstep = static_cast<int>(parse_int(key, value));
  else if (key == "num_q") cfg.td.num_q = static_cast<int>(parse_int(key, value));
  else if (key == "subsample") cfg.td.subsample = static_cast<int>(parse_int(key, value));
  else if (key == "policy_noise") cfg.td.policy_noise = parse_real(key, value);
  else if (key == "noise_clip") cfg.td.noise_clip = parse_real(key, value);
  else if (key == "ema_tau") cfg.td.ema_tau = parse_real(key, value);
  else if (key == "mppi.horizon") cfg.mppi.horizon = static_cast<int>(parse_int(key, value));
  else if (key == "mppi.iterations")
    cfg.mppi.iterations = static_cast<int>(parse_int(key, value));
  else if (key == "mppi.population")
    cfg.mppi.population = static_cast<int>(parse_int(key, value));
  else if (key == "mppi.prior_population")
    cfg.mppi.prior_population = static_cast<int>(parse_int(key, value));
  else if (key == "mppi.elites") cfg.mppi.elites = static_cast<int>(parse_int(key, value));
  else if (key == "mppi.min_std") cfg.mppi.min_std = parse_real(key, value);
  else if (key == "mppi.max_std") cfg.mppi.max_std = parse_real(key, value);
  else if (key == "mppi.temperature") cfg.mppi.temperature = parse_real(key, value);
  else if (key == "mppi.plan_discount") cfg.mppi.plan_discount = parse_real(key, value);
  else if (key == "mppi.warm_start_std") cfg.mppi.warm_start_std = parse_bool(key, value);
  else if (key == "mppi.argmax_action") cfg.mppi.argmax_action = parse_bool(key, value);
  else if (key == "noise.start") cfg.noise.start = parse_real(key, value);
  else if (key == "noise.end") cfg.noise.end = parse_real(key, value);
  else if (key == "noise.episodes") cfg.noise.episodes = static_cast<int>(parse_int(key, value));
  else throw ConfigError("unknown config key: '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("env", cfg.env);
  e.emplace_back("seed", std::to_string(cfg.seed));
  e.emplace_back("episodes", std::to_string(cfg.episodes));
  e.emplace_back("random_episodes", std::to_string(cfg.random_episodes));
  e.emplace_back("batch_size", std::to_string(cfg.batch_size));
  e.emplace_back("buffer_capacity", std::to_string(cfg.buffer_capacity));
  e.emplace_back("utd", std::to_string(cfg.utd));
  e.emplace_back("wm_horizon", std::to_string(cfg.wm_horizon));
  e.emplace_back("actor_period", std::to_string(cfg.actor_period));
  e.emplace_back("lr", fmt_real(cfg.lr));
  e.emplace_back("encoder_lr", fmt_real(cfg.encoder_lr));
  e.emplace_back("precision", cfg.precision);
  e.emplace_back("symlog_rewards", cfg.symlog_rewards ? "true" : "false");
  e.emplace_back("eval_every", std::to_string(cfg.eval_every));
  e.emplace_back("eval_episodes", std::to_string(cfg.eval_episodes));
  e.emplace_back("checkpoint_every", std::to_string(cfg.checkpoint_every));
  e.emplace_back("latent_dim", std::to_string(cfg.wm.latent_dim));
  e.emplace_back("fsq_levels", fmt_int_list(cfg.wm.fsq_levels));
  e.emplace_back("encoding", encoding_name(cfg.wm.encoding));
  e.emplace_back("encoder_hidden", fmt_int_list(cfg.wm.encoder_hidden));
  e.emplace_back("mlp_hidden", fmt_int_list(cfg.wm.mlp_hidden));
  e.emplace_back("gs_tau", fmt_real(cfg.wm.gs_tau));
  e.emplace_back("wm_discount", fmt_real(cfg.wm.discount));
  e.emplace_back("discount", fmt_real(cfg.td.discount));
  e.emplace_back("nstep", std::to_string(cfg.td.nstep));
  e.emplace_back("num_q", std::to_string(cfg.td.num_q));
  e.emplace_back("subsample", std::to_string(cfg.td.subsample));
  e.emplace_back("policy_noise", fmt_real(cfg.td.policy_noise));
  e.emplace_back("noise_clip", fmt_real(cfg.td.noise_clip));
  e.emplace_back("ema_tau", fmt_real(cfg.td.ema_tau));
  e.emplace_back("mppi.horizon", std::to_string(cfg.mppi.horizon));
  e.emplace_back("mppi.iterations", std::to_string(cfg.mppi.iterations));
  e.emplace_back("mppi.population", std::to_string(cfg.mppi.population));
  e.emplace_back("mppi.prior_population", std::to_string(cfg.mppi.prior_population));
  e.emplace_back("mppi.elites", std::to_string(cfg.mppi.elites));
  e.emplace_back("mppi.min_std", fmt_real(cfg.mppi.min_std));
  e.emplace_back("mppi.max_std", fmt_real(cfg.mppi.max_std));
  e.emplace_back("mppi.temperature", fmt_real(cfg.mppi.temperature));
  e.emplace_back("mppi.plan_discount", fmt_real(cfg.mppi.plan_discount));
  e.emplace_back("mppi.warm_start_std", cfg.mppi.warm_start_std ? "true" : "false");
  e.emplace_back("mppi.argmax_action", cfg.mppi.argmax_action ? "true" : "false");
  e.emplace_back("noise.start", fmt_real(cfg.noise.start));
  e.emplace_back("noise.end", fmt_real(cfg.noise.end));
  e.emplace_back("noise.episodes", std::to_string(cfg.noise.episodes));
  return e;
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    apply_config_key(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_run_config(in);
}

}  // namespace dcwm
