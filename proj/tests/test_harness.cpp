#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "dcwm/config.hpp"
#include "dcwm/errors.hpp"
#include "dcwm/replay.hpp"

using namespace dcwm;

namespace {

// Observations that encode where they came from: obs = (1000*episode + step,
// -(1000*episode + step)).  Lets a sampled batch be audited without access to
// buffer internals.
struct TaggedWriter {
  ReplayBuffer<double>& buf;
  int episode = -1;

  void start() {
    buf.begin_episode();
    ++episode;
  }
  void push_step(int step) {
    const double tag = 1000.0 * episode + step;
    buf.push({tag, -tag}, {0.5 * tag}, {tag + 1.0, -(tag + 1.0)}, 0.001 * tag);
  }
};

}  // namespace

TEST_CASE("replay rejects bad construction and misuse") {
  CHECK_THROWS_AS(ReplayBuffer<double>(0, 3, 1), ContractError);
  CHECK_THROWS_AS(ReplayBuffer<double>(8, 0, 1), ContractError);
  CHECK_THROWS_AS(ReplayBuffer<double>(8, 3, 0), ContractError);

  ReplayBuffer<double> buf(8, 2, 1);
  CHECK_THROWS_AS(buf.push({0, 0}, {0}, {0, 0}, 0.0), ContractError);
  buf.begin_episode();
  CHECK_THROWS_AS(buf.push({0}, {0}, {0, 0}, 0.0), DimensionError);
  CHECK_THROWS_AS(buf.push({0, 0}, {0, 0}, {0, 0}, 0.0), DimensionError);
  CHECK_THROWS_AS(buf.push({0, 0}, {0}, {0}, 0.0), DimensionError);
  CHECK(buf.size() == 0);

  buf.push({1, 2}, {3}, {4, 5}, 6.0);
  Rng rng(0);
  CHECK_THROWS_AS(buf.sample(0, 1, rng), ContractError);
  CHECK_THROWS_AS(buf.sample(4, 0, rng), ContractError);
  CHECK_THROWS_AS(buf.sample(4, 2, rng), ContractError);  // only 1 stored
}

TEST_CASE("replay evicts oldest transitions first") {
  ReplayBuffer<double> buf(5, 2, 1);
  TaggedWriter w{buf};
  w.start();
  for (int step = 0; step < 8; ++step) w.push_step(step);

  CHECK(buf.size() == 5);
  CHECK(buf.capacity() == 5);
  // Steps 0..2 were overwritten; logical 0 is now step 3.
  for (size_t i = 0; i < 5; ++i) {
    CHECK(buf.obs_at(i)[0] == doctest::Approx(3.0 + i));
    CHECK(buf.next_obs_at(i)[0] == doctest::Approx(4.0 + i));
    CHECK(buf.action_at(i)[0] == doctest::Approx(0.5 * (3.0 + i)));
    CHECK(buf.reward_at(i) == doctest::Approx(0.001 * (3.0 + i)));
    CHECK(buf.episode_at(i) == 0);
  }
}

TEST_CASE("replay episode ids stay non-decreasing across wraparound") {
  ReplayBuffer<double> buf(7, 2, 1);
  TaggedWriter w{buf};
  for (int e = 0; e < 6; ++e) {
    w.start();
    for (int step = 0; step < 3; ++step) w.push_step(step);
  }
  CHECK(buf.size() == 7);
  for (size_t i = 0; i + 1 < buf.size(); ++i) CHECK(buf.episode_at(i) <= buf.episode_at(i + 1));
  CHECK(buf.episode_at(0) == 3);  // episodes 0-2 fully evicted, 3 partially
  CHECK(buf.episode_at(6) == 5);
}

TEST_CASE("sampled windows never straddle an episode boundary") {
  ReplayBuffer<double> buf(512, 2, 1);
  TaggedWriter w{buf};
  Rng lens(99);
  for (int e = 0; e < 30; ++e) {
    w.start();
    const int len = 3 + static_cast<int>(lens.below(7));  // 3..9 steps
    for (int step = 0; step < len; ++step) w.push_step(step);
  }

  Rng rng(7);
  const int window = 3;
  auto batch = buf.sample(64, window, rng);
  REQUIRE(batch.obs.size() == window + 1);
  REQUIRE(batch.actions.size() == window);
  REQUIRE(batch.rewards.size() == window);
  for (int b = 0; b < 64; ++b) {
    const double tag0 = batch.obs[0].at(b, 0);
    const int episode = static_cast<int>(tag0) / 1000;
    const int step0 = static_cast<int>(tag0) % 1000;
    for (int h = 0; h <= window; ++h) {
      const double tag = batch.obs[h].at(b, 0);
      // Consecutive steps of one episode; obs[h+1] is next_obs of step h.
      CHECK(tag == doctest::Approx(1000.0 * episode + step0 + h));
      CHECK(batch.obs[h].at(b, 1) == doctest::Approx(-tag));
      if (h < window) {
        CHECK(batch.actions[h].at(b, 0) == doctest::Approx(0.5 * tag));
        CHECK(batch.rewards[h].at(b, 0) == doctest::Approx(0.001 * tag));
      }
    }
  }
}

TEST_CASE("sampling fails loudly when no episode fits the window") {
  ReplayBuffer<double> buf(64, 2, 1);
  TaggedWriter w{buf};
  for (int e = 0; e < 4; ++e) {
    w.start();
    for (int step = 0; step < 2; ++step) w.push_step(step);
  }
  Rng rng(1);
  CHECK(buf.size() == 8);
  CHECK_THROWS_WITH_AS(buf.sample(4, 3, rng),
                       "replay sample: no stored episode spans the requested window",
                       ContractError);
  // window 1 never crosses anything, window 2 fits each episode exactly.
  CHECK_NOTHROW(buf.sample(16, 1, rng));
  auto two = buf.sample(16, 2, rng);
  for (int b = 0; b < 16; ++b)
    CHECK(static_cast<int>(two.obs[0].at(b, 0)) % 1000 == 0);  // only valid start
}

TEST_CASE("sampling is a pure function of the rng state") {
  ReplayBuffer<float> buf(256, 3, 2);
  buf.begin_episode();
  Rng fill(5);
  for (int i = 0; i < 200; ++i) {
    if (i % 40 == 0) buf.begin_episode();
    buf.push({fill.uniform(), fill.uniform(), fill.uniform()},
             {fill.uniform(-1, 1), fill.uniform(-1, 1)},
             {fill.uniform(), fill.uniform(), fill.uniform()}, fill.uniform());
  }
  Rng a(123), b(123), c(124);
  auto ba = buf.sample(32, 4, a);
  auto bb = buf.sample(32, 4, b);
  auto bc = buf.sample(32, 4, c);
  bool same = true, diff = false;
  for (size_t h = 0; h < ba.obs.size(); ++h)
    for (size_t i = 0; i < ba.obs[h].data.size(); ++i) {
      same = same && ba.obs[h].data[i] == bb.obs[h].data[i];
      diff = diff || ba.obs[h].data[i] != bc.obs[h].data[i];
    }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("noise schedule interpolates then holds") {
  NoiseSchedule n;  // 1.0 -> 0.1 over 20
  CHECK(n.at(0) == doctest::Approx(1.0));
  CHECK(n.at(10) == doctest::Approx(0.55));
  CHECK(n.at(20) == doctest::Approx(0.1));
  CHECK(n.at(500) == doctest::Approx(0.1));
  CHECK(n.at(-3) == doctest::Approx(1.0));

  NoiseSchedule flat{0.7, 0.2, 0};
  CHECK(flat.at(0) == doctest::Approx(0.2));
  CHECK(flat.at(9) == doctest::Approx(0.2));
}

TEST_CASE("default run config is valid and carries the documented values") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.episodes == 150);
  CHECK(cfg.random_episodes == 10);
  CHECK(cfg.batch_size == 512);
  CHECK(cfg.buffer_capacity == 1000000);
  CHECK(cfg.lr == doctest::Approx(3e-4));
  CHECK(cfg.encoder_lr == doctest::Approx(1e-4));
  CHECK(cfg.td.num_q == 5);
  CHECK(cfg.td.subsample == 2);
  CHECK(cfg.td.nstep == 3);
  CHECK(cfg.td.ema_tau == doctest::Approx(0.005));
  CHECK(cfg.wm.fsq_levels == std::vector<int>{5, 3});
  CHECK(cfg.wm.discount == doctest::Approx(0.9));
  CHECK(cfg.mppi.population == 512);
  CHECK(cfg.mppi.prior_population == 24);
  CHECK(cfg.mppi.elites == 64);
  CHECK(cfg.mppi.temperature == doctest::Approx(0.5));
  CHECK(cfg.noise.start == doctest::Approx(1.0));
  CHECK(cfg.noise.episodes == 20);
}

TEST_CASE("config entries round-trip exactly through apply_config_key") {
  RunConfig cfg;
  cfg.env = "pointmass";
  cfg.seed = 987654321;
  cfg.episodes = 42;
  cfg.lr = 0.3;  // decimal with no exact binary form
  cfg.encoder_lr = 7.25e-5;
  cfg.precision = "double";
  cfg.symlog_rewards = true;
  cfg.wm.latent_dim = 4;
  cfg.wm.fsq_levels = {8, 6, 5};
  cfg.wm.encoding = Encoding::kOneHot;
  cfg.wm.encoder_hidden = {32, 16};
  cfg.wm.mlp_hidden = {64};
  cfg.td.policy_noise = 0.123456789012345;
  cfg.mppi.horizon = 5;
  cfg.mppi.warm_start_std = true;
  cfg.noise.end = 0.05;

  const auto entries = config_entries(cfg);
  RunConfig back;
  for (const auto& [k, v] : entries) apply_config_key(back, k, v);
  const auto again = config_entries(back);
  REQUIRE(entries.size() == again.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    CHECK(entries[i].first == again[i].first);
    CHECK(entries[i].second == again[i].second);
  }

  // Every entry key is unique (the listing is a faithful serialization).
  std::set<std::string> keys;
  for (const auto& [k, v] : entries) keys.insert(k);
  CHECK(keys.size() == entries.size());
}

TEST_CASE("config files parse with comments and whitespace") {
  std::istringstream in(
      "# training run\n"
      "env = pointmass\n"
      "\n"
      "  seed=17   # inline comment\n"
      "episodes = 30\n"
      "random_episodes = 5\n"
      "fsq_levels = 4, 3\n"
      "mppi.elites = 8\n"
      "mppi.population = 32\n"
      "symlog_rewards = true\n");
  RunConfig cfg = parse_run_config(in);
  CHECK(cfg.env == "pointmass");
  CHECK(cfg.seed == 17);
  CHECK(cfg.episodes == 30);
  CHECK(cfg.random_episodes == 5);
  CHECK(cfg.wm.fsq_levels == std::vector<int>{4, 3});
  CHECK(cfg.mppi.elites == 8);
  CHECK(cfg.mppi.population == 32);
  CHECK(cfg.symlog_rewards);
  // Untouched keys keep their defaults.
  CHECK(cfg.batch_size == 512);
}

TEST_CASE("config parse errors carry line numbers and key names") {
  {
    std::istringstream in("env = pendulum\nbogus_key = 3\n");
    CHECK_THROWS_WITH_AS(parse_run_config(in), "unknown config key: 'bogus_key'", ConfigError);
  }
  {
    std::istringstream in("env = pendulum\nepisodes 30\n");
    CHECK_THROWS_WITH_AS(parse_run_config(in), "config line 2: expected key = value",
                         ConfigError);
  }
  {
    std::istringstream in("episodes =\n");
    CHECK_THROWS_WITH_AS(parse_run_config(in), "config line 1: empty key or value", ConfigError);
  }
  {
    std::istringstream in("episodes = twelve\n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  }
  {
    std::istringstream in("lr = 1e\n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  }
  {
    std::istringstream in("symlog_rewards = yes\n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  }
  {
    std::istringstream in("fsq_levels = \n");
    CHECK_THROWS_AS(parse_run_config(in), ConfigError);
  }
}

TEST_CASE("config validation rejects inconsistent settings") {
  auto broken = [](auto&& tweak) {
    RunConfig cfg;
    tweak(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.episodes = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.random_episodes = 200; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.precision = "half"; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.td.subsample = 9; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.wm.fsq_levels = {5, 1}; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.mppi.elites = 4096; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.mppi.min_std = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](RunConfig& c) { c.lr = 0; }).validate(), ConfigError);
}
