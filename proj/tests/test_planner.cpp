#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "dcwm/planner.hpp"

using namespace dcwm;

namespace {

// Fixed-point objective: maximizing Phi drives every action toward target.
struct QuadraticModel : TrajectoryModel<double> {
  int ad;
  std::vector<double> target;
  explicit QuadraticModel(std::vector<double> t) : ad(static_cast<int>(t.size())), target(t) {}

  int state_dim() const override { return 1; }
  int action_dim() const override { return ad; }
  std::vector<double> action_low() const override { return std::vector<double>(ad, -1.0); }
  std::vector<double> action_high() const override { return std::vector<double>(ad, 1.0); }
  Mat<double> initial_state(const Mat<double>&) const override { return Mat<double>(1, 1); }
  Mat<double> step(const Mat<double>& s, const Mat<double>&) const override { return s; }
  Mat<double> reward(const Mat<double>& s, const Mat<double>& a) const override {
    Mat<double> r(s.rows, 1);
    for (int i = 0; i < s.rows; ++i) {
      double v = 0;
      for (int c = 0; c < ad; ++c) {
        const double d = a.at(i, c) - target[c];
        v -= d * d;
      }
      r.at(i, 0) = v;
    }
    return r;
  }
  Mat<double> terminal_value(const Mat<double>& s, const Mat<double>& a) const override {
    return reward(s, a);
  }
};

// Scalar-state chain over the 15 codebook values with softmax transitions.
struct ChainModel : TrajectoryModel<double> {
  Codebook<double> cb{std::vector<int>{15}};

  double drift(double s, double a) const { return 0.8 * s + 0.3 * a; }

  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  std::vector<double> action_low() const override { return {-1.0}; }
  std::vector<double> action_high() const override { return {1.0}; }
  Mat<double> initial_state(const Mat<double>& obs) const override {
    Mat<double> s(1, 1);
    s.at(0, 0) = cb.quantize_scalar(obs.at(0, 0), 0);
    return s;
  }
  Mat<double> step(const Mat<double>& s, const Mat<double>& a) const override {
    Mat<double> out(s.rows, 1);
    for (int i = 0; i < s.rows; ++i) out.at(i, 0) = expected_next(s.at(i, 0), a.at(i, 0));
    return out;
  }
  double expected_next(double s, double a) const {
    const double z = drift(s, a);
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> logit(cb.size());
    for (int k = 0; k < cb.size(); ++k) {
      const double d = cb.code(k)[0] - z;
      logit[k] = -d * d / 0.05;
      m = std::max(m, logit[k]);
    }
    double num = 0, den = 0;
    for (int k = 0; k < cb.size(); ++k) {
      const double w = std::exp(logit[k] - m);
      num += w * cb.code(k)[0];
      den += w;
    }
    return num / den;
  }
  Mat<double> reward(const Mat<double>& s, const Mat<double>& a) const override {
    Mat<double> r(s.rows, 1);
    for (int i = 0; i < s.rows; ++i)
      r.at(i, 0) = s.at(i, 0) - 0.1 * a.at(i, 0) * a.at(i, 0);
    return r;
  }
  Mat<double> terminal_value(const Mat<double>& s, const Mat<double>& a) const override {
    Mat<double> v(s.rows, 1);
    for (int i = 0; i < s.rows; ++i) v.at(i, 0) = 2.0 * s.at(i, 0) - 0.5 * a.at(i, 0);
    return v;
  }
};

struct ZeroModel : TrajectoryModel<double> {
  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  std::vector<double> action_low() const override { return {-1.0}; }
  std::vector<double> action_high() const override { return {1.0}; }
  Mat<double> initial_state(const Mat<double>&) const override { return Mat<double>(1, 2); }
  Mat<double> step(const Mat<double>& s, const Mat<double>&) const override { return s; }
  Mat<double> reward(const Mat<double>& s, const Mat<double>&) const override {
    return Mat<double>(s.rows, 1);
  }
  Mat<double> terminal_value(const Mat<double>& s, const Mat<double>&) const override {
    return Mat<double>(s.rows, 1);
  }
};

// Reward goes NaN on half the action range.
struct PartlyBrokenModel : TrajectoryModel<double> {
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  std::vector<double> action_low() const override { return {-1.0}; }
  std::vector<double> action_high() const override { return {1.0}; }
  Mat<double> initial_state(const Mat<double>&) const override { return Mat<double>(1, 1); }
  Mat<double> step(const Mat<double>& s, const Mat<double>&) const override { return s; }
  Mat<double> reward(const Mat<double>& s, const Mat<double>& a) const override {
    Mat<double> r(s.rows, 1);
    for (int i = 0; i < s.rows; ++i) {
      r.at(i, 0) = a.at(i, 0) > 0.5 ? std::numeric_limits<double>::quiet_NaN()
                                    : -a.at(i, 0) * a.at(i, 0);
    }
    return r;
  }
  Mat<double> terminal_value(const Mat<double>& s, const Mat<double>&) const override {
    return Mat<double>(s.rows, 1);
  }
};

struct PriorModel : QuadraticModel {
  explicit PriorModel(std::vector<double> t) : QuadraticModel(t) {}
  bool has_prior() const override { return true; }
  Mat<double> prior_action(const Mat<double>& s) const override {
    Mat<double> a(s.rows, ad);
    for (int i = 0; i < s.rows; ++i)
      for (int c = 0; c < ad; ++c) a.at(i, c) = target[c];
    return a;
  }
};

MppiConfig small_cfg() {
  MppiConfig cfg;
  cfg.horizon = 3;
  cfg.iterations = 6;
  cfg.population = 512;
  cfg.prior_population = 0;
  cfg.elites = 64;
  return cfg;
}

TrajectoryScore<double> scalar_elite(double action, double score, int steps = 1) {
  TrajectoryScore<double> e;
  e.actions = Mat<double>(steps, 1, action);
  e.score = score;
  return e;
}

}  // namespace

TEST_CASE("config validation rejects inconsistent settings") {
  MppiConfig cfg = small_cfg();
  CHECK_NOTHROW(cfg.validate());
  cfg.elites = cfg.population + cfg.prior_population + 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.min_std = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.min_std = 3.0;  // above max_std
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.horizon = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("refit reproduces the two-elite arithmetic example") {
  MppiConfig cfg = small_cfg();  // temperature 0.5
  std::vector<TrajectoryScore<double>> elite{scalar_elite(1.0, 0.0), scalar_elite(3.0, -2.0)};
  PlanState<double> s = refit(elite, cfg);

  const double w2 = std::exp(-1.0);
  const double mu = (1.0 + 3.0 * w2) / (1.0 + w2);
  CHECK(elite[0].weight == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(elite[1].weight == doctest::Approx(w2).epsilon(1e-15));
  CHECK(s.mean.at(0, 0) == doctest::Approx(mu).epsilon(1e-12));
  CHECK(s.mean.at(0, 0) == doctest::Approx(1.5379).epsilon(1e-4));

  const double var = ((1.0 - mu) * (1.0 - mu) + w2 * (3.0 - mu) * (3.0 - mu)) / (1.0 + w2);
  CHECK(s.std.at(0, 0) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("refit of a single elite pins the mean and clamps std up") {
  MppiConfig cfg = small_cfg();
  std::vector<TrajectoryScore<double>> elite{scalar_elite(0.625, -3.0, 4)};
  PlanState<double> s = refit(elite, cfg);
  for (int h = 0; h < 4; ++h) {
    CHECK(s.mean.at(h, 0) == 0.625);
    CHECK(s.std.at(h, 0) == cfg.min_std);
  }
  CHECK(elite[0].weight == 1.0);
}

TEST_CASE("equal elite scores give the unweighted average") {
  MppiConfig cfg = small_cfg();
  std::vector<TrajectoryScore<double>> elite{scalar_elite(-0.4, 7.0), scalar_elite(1.0, 7.0)};
  PlanState<double> s = refit(elite, cfg);
  CHECK(s.mean.at(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(elite[0].weight == 1.0);
  CHECK(elite[1].weight == 1.0);
}

TEST_CASE("zero reward and value score every trajectory at zero") {
  ZeroModel model;
  Mat<double> s0(1, 2);
  std::vector<Mat<double>> acts(4, Mat<double>(8, 1, 0.3));
  std::vector<double> phi = evaluate_trajectories(model, s0, acts, 0.99);
  REQUIRE(phi.size() == 8);
  for (double v : phi) CHECK(v == 0.0);
}

TEST_CASE("zero-horizon evaluation is the terminal value at the start state") {
  ChainModel model;
  Mat<double> obs(1, 1);
  obs.at(0, 0) = 0.4;
  Mat<double> s0 = model.initial_state(obs);
  std::vector<Mat<double>> acts{Mat<double>(3, 1)};
  acts[0].at(0, 0) = -1.0;
  acts[0].at(1, 0) = 0.0;
  acts[0].at(2, 0) = 0.5;
  std::vector<double> phi = evaluate_trajectories(model, s0, acts, 0.99);
  for (int i = 0; i < 3; ++i) {
    const double want = 2.0 * s0.at(0, 0) - 0.5 * acts[0].at(i, 0);
    CHECK(phi[i] == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("chain rollout scores match exhaustive enumeration") {
  ChainModel model;
  Mat<double> obs(1, 1);
  obs.at(0, 0) = -0.23;
  Mat<double> s0 = model.initial_state(obs);

  const int H = 2;
  const double gamma = 0.97;
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(-1.0 + 0.25 * i);
  const int n = 9 * 9 * 9;

  std::vector<Mat<double>> acts(H + 1, Mat<double>(n, 1));
  std::vector<double> want(n);
  int row = 0;
  for (double a0 : grid) {
    for (double a1 : grid) {
      for (double a2 : grid) {
        acts[0].at(row, 0) = a0;
        acts[1].at(row, 0) = a1;
        acts[2].at(row, 0) = a2;
        // Independent accumulation of the same recursion, one trajectory at
        // a time.
        double s = s0.at(0, 0);
        double phi = (s - 0.1 * a0 * a0);
        s = model.expected_next(s, a0);
        phi += gamma * (s - 0.1 * a1 * a1);
        s = model.expected_next(s, a1);
        phi += gamma * gamma * (2.0 * s - 0.5 * a2);
        want[row] = phi;
        ++row;
      }
    }
  }

  std::vector<double> got = evaluate_trajectories(model, s0, acts, gamma);
  for (int i = 0; i < n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("non-finite rewards knock trajectories out with -inf") {
  PartlyBrokenModel model;
  Mat<double> s0(1, 1);
  std::vector<Mat<double>> acts(2, Mat<double>(4, 1));
  acts[0].at(0, 0) = -0.2;
  acts[0].at(1, 0) = 0.9;  // NaN reward
  acts[0].at(2, 0) = 0.4;
  acts[0].at(3, 0) = 0.6;  // NaN reward
  std::vector<double> phi = evaluate_trajectories(model, s0, acts, 1.0);
  CHECK(std::isfinite(phi[0]));
  CHECK(phi[1] == -std::numeric_limits<double>::infinity());
  CHECK(std::isfinite(phi[2]));
  CHECK(phi[3] == -std::numeric_limits<double>::infinity());

  // Planning still works off the finite half of the action range.
  MppiConfig cfg = small_cfg();
  cfg.population = 64;
  cfg.elites = 8;
  cfg.iterations = 3;
  Rng rng(11);
  PlanResult<double> res = plan<double>(model, Mat<double>(1, 1),
                                        initial_plan_state<double>(cfg, 1), cfg, false, 0.0, rng);
  CHECK(std::isfinite(res.best_score));
  CHECK(res.action.at(0, 0) <= 0.5);
}

TEST_CASE("planner mean converges to the quadratic optimum") {
  Rng rng(101);
  MppiConfig cfg = small_cfg();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> target{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    QuadraticModel model(target);
    Rng prng(1000 + trial);
    PlanResult<double> res = plan<double>(model, Mat<double>(1, 1),
                                          initial_plan_state<double>(cfg, 2), cfg, false, 0.0,
                                          prng);
    for (int c = 0; c < 2; ++c)
      CHECK(std::abs(res.solved.mean.at(0, c) - target[c]) < 0.05);
  }
}

TEST_CASE("best elite score is monotone over iterations") {
  QuadraticModel model({0.3, -0.6});
  MppiConfig cfg = small_cfg();
  Rng rng(7);
  std::vector<PlanTraceRow<double>> trace;
  plan<double>(model, Mat<double>(1, 1), initial_plan_state<double>(cfg, 2), cfg, false, 0.0,
               rng, &trace);
  REQUIRE(trace.size() == static_cast<size_t>(cfg.iterations));
  for (size_t j = 1; j < trace.size(); ++j)
    CHECK(trace[j].best_score >= trace[j - 1].best_score);
  for (const auto& row : trace) CHECK(row.mean0.size() == 2);
}

TEST_CASE("same seed reproduces the plan bit for bit") {
  QuadraticModel model({-0.25, 0.7});
  MppiConfig cfg = small_cfg();
  cfg.population = 128;
  cfg.elites = 16;

  std::vector<PlanTraceRow<double>> t1, t2;
  Rng r1(42), r2(42);
  PlanResult<double> a = plan<double>(model, Mat<double>(1, 1),
                                      initial_plan_state<double>(cfg, 2), cfg, true, 0.3, r1,
                                      &t1);
  PlanResult<double> b = plan<double>(model, Mat<double>(1, 1),
                                      initial_plan_state<double>(cfg, 2), cfg, true, 0.3, r2,
                                      &t2);
  CHECK(a.action.data == b.action.data);
  CHECK(a.solved.mean.data == b.solved.mean.data);
  CHECK(a.solved.std.data == b.solved.std.data);
  REQUIRE(t1.size() == t2.size());
  for (size_t j = 0; j < t1.size(); ++j) {
    CHECK(t1[j].best_score == t2[j].best_score);
    CHECK(t1[j].mean_score == t2[j].mean_score);
  }

  Rng r3(43);
  PlanResult<double> c = plan<double>(model, Mat<double>(1, 1),
                                      initial_plan_state<double>(cfg, 2), cfg, true, 0.3, r3);
  CHECK(a.action.data != c.action.data);
}

TEST_CASE("repeated evaluation of the same actions is deterministic") {
  ChainModel model;
  Mat<double> s0(1, 1);
  s0.at(0, 0) = 2.0 / 7.0;
  Rng rng(5);
  std::vector<Mat<double>> acts(3, Mat<double>(16, 1));
  for (auto& m : acts)
    for (auto& v : m.data) v = rng.uniform(-1, 1);
  std::vector<double> p1 = evaluate_trajectories(model, s0, acts, 0.99);
  std::vector<double> p2 = evaluate_trajectories(model, s0, acts, 0.99);
  CHECK(p1 == p2);
}

TEST_CASE("warm start shifts the mean one step and resets std") {
  MppiConfig cfg = small_cfg();
  PlanState<double> solved = initial_plan_state<double>(cfg, 2);
  Rng rng(9);
  for (auto& v : solved.mean.data) v = rng.uniform(-1, 1);
  for (auto& v : solved.std.data) v = rng.uniform(cfg.min_std, cfg.max_std);

  PlanState<double> next = warm_start_shift(solved, cfg);
  for (int h = 0; h < cfg.horizon; ++h)
    for (int c = 0; c < 2; ++c) CHECK(next.mean.at(h, c) == solved.mean.at(h + 1, c));
  for (int c = 0; c < 2; ++c) CHECK(next.mean.at(cfg.horizon, c) == 0.0);
  for (double v : next.std.data) CHECK(v == cfg.max_std);

  cfg.warm_start_std = true;
  PlanState<double> carried = warm_start_shift(solved, cfg);
  for (int h = 0; h < cfg.horizon; ++h)
    for (int c = 0; c < 2; ++c) CHECK(carried.std.at(h, c) == solved.std.at(h + 1, c));
  for (int c = 0; c < 2; ++c) CHECK(carried.std.at(cfg.horizon, c) == cfg.max_std);
}

TEST_CASE("argmax pick agrees with the categorical draw when there is one elite") {
  QuadraticModel model({0.1, 0.2});
  MppiConfig cfg = small_cfg();
  cfg.population = 64;
  cfg.elites = 1;
  cfg.iterations = 2;

  Rng r1(77), r2(77);
  cfg.argmax_action = false;
  PlanResult<double> a = plan<double>(model, Mat<double>(1, 1),
                                      initial_plan_state<double>(cfg, 2), cfg, false, 0.0, r1);
  cfg.argmax_action = true;
  PlanResult<double> b = plan<double>(model, Mat<double>(1, 1),
                                      initial_plan_state<double>(cfg, 2), cfg, false, 0.0, r2);
  CHECK(a.action.data == b.action.data);
}

TEST_CASE("prior rollout wins when it hits the optimum exactly") {
  PriorModel model({0.37, -0.81});
  MppiConfig cfg = small_cfg();
  cfg.population = 8;
  cfg.prior_population = 4;
  cfg.elites = 1;
  cfg.iterations = 1;
  cfg.argmax_action = true;

  Rng rng(3);
  PlanResult<double> res = plan<double>(model, Mat<double>(1, 1),
                                        initial_plan_state<double>(cfg, 2), cfg, false, 0.0,
                                        rng);
  CHECK(res.action.at(0, 0) == 0.37);
  CHECK(res.action.at(0, 1) == -0.81);
  CHECK(res.best_score == 0.0);
}

TEST_CASE("exploration noise stays inside the action bounds") {
  QuadraticModel model({0.95, -0.95});
  MppiConfig cfg = small_cfg();
  cfg.population = 32;
  cfg.elites = 4;
  cfg.iterations = 2;
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    PlanResult<double> res = plan<double>(model, Mat<double>(1, 1),
                                          initial_plan_state<double>(cfg, 2), cfg, true, 5.0,
                                          rng);
    for (int c = 0; c < 2; ++c) {
      CHECK(res.action.at(0, c) >= -1.0);
      CHECK(res.action.at(0, c) <= 1.0);
    }
  }
}

TEST_CASE("solved std is always inside the configured band") {
  QuadraticModel model({0.0, 0.0});
  MppiConfig cfg = small_cfg();
  Rng rng(13);
  PlanResult<double> res = plan<double>(model, Mat<double>(1, 1),
                                        initial_plan_state<double>(cfg, 2), cfg, false, 0.0,
                                        rng);
  for (double v : res.solved.std.data) {
    CHECK(v >= cfg.min_std);
    CHECK(v <= cfg.max_std);
  }
}

TEST_CASE("learned-model adapter matches hand-rolled expected codes") {
  WorldModelConfig wcfg;
  wcfg.obs_dim = 3;
  wcfg.act_dim = 2;
  wcfg.latent_dim = 2;
  wcfg.fsq_levels = {5, 3};
  wcfg.encoder_hidden = {8};
  wcfg.mlp_hidden = {8, 8};
  Rng rng(17);
  WorldModel<double> wm(wcfg, rng);
  TdConfig tcfg;
  Agent<double> agent(wm.encoded_width(), wcfg.act_dim, {8, 8}, tcfg,
                      std::vector<double>{-1, -1}, std::vector<double>{1, 1}, rng);
  LearnedPlanModel<double> model(wm, agent);

  Mat<double> obs(2, 3);
  for (auto& v : obs.data) v = rng.uniform(-1, 1);
  Mat<double> states = wm.encode_codes(obs);
  Mat<double> acts(2, 2);
  for (auto& v : acts.data) v = rng.uniform(-1, 1);

  Mat<double> got = model.step(states, acts);
  Mat<double> logits = wm.dynamics_logits(states, acts);
  const auto& cb = wm.codebook();
  const int K = cb.size();
  for (int r = 0; r < 2; ++r) {
    for (int dim = 0; dim < wcfg.latent_dim; ++dim) {
      const double* l = logits.row(r) + dim * K;
      double m = l[0];
      for (int k = 1; k < K; ++k) m = std::max(m, l[k]);
      double z = 0;
      std::vector<double> p(K);
      for (int k = 0; k < K; ++k) {
        p[k] = std::exp(l[k] - m);
        z += p[k];
      }
      for (int ch = 0; ch < cb.channels(); ++ch) {
        double want = 0;
        for (int k = 0; k < K; ++k) want += p[k] / z * cb.code(k)[ch];
        CHECK(got.at(r, dim * cb.channels() + ch) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  // Zero-horizon score through the adapter is the critic ensemble mean.
  Mat<double> one_obs(1, 3);
  for (auto& v : one_obs.data) v = rng.uniform(-1, 1);
  Mat<double> s0 = model.initial_state(one_obs);
  std::vector<Mat<double>> a0{Mat<double>(1, 2)};
  a0[0].at(0, 0) = 0.2;
  a0[0].at(0, 1) = -0.4;
  std::vector<double> phi = evaluate_trajectories<double>(model, s0, a0, 0.99);
  Mat<double> want = agent.critic_mean(wm.apply_encoding(s0), a0[0]);
  CHECK(phi[0] == doctest::Approx(want.at(0, 0)).epsilon(1e-12));
}

TEST_CASE("full planning call through the learned model stays finite") {
  for (Encoding enc : {Encoding::kCodes, Encoding::kOneHot, Encoding::kLabel}) {
    WorldModelConfig wcfg;
    wcfg.obs_dim = 3;
    wcfg.act_dim = 2;
    wcfg.latent_dim = 2;
    wcfg.fsq_levels = {5, 3};
    wcfg.encoder_hidden = {8};
    wcfg.mlp_hidden = {8, 8};
    wcfg.encoding = enc;
    Rng rng(23);
    WorldModel<double> wm(wcfg, rng);
    Agent<double> agent(wm.encoded_width(), wcfg.act_dim, {8, 8}, TdConfig{},
                        std::vector<double>{-1, -1}, std::vector<double>{1, 1}, rng);
    LearnedPlanModel<double> model(wm, agent);

    MppiConfig cfg = small_cfg();
    cfg.population = 24;
    cfg.prior_population = 4;
    cfg.elites = 6;
    cfg.iterations = 2;

    Mat<double> obs(1, 3);
    for (auto& v : obs.data) v = rng.uniform(-1, 1);
    std::vector<PlanTraceRow<double>> trace;
    PlanResult<double> res = plan<double>(model, obs, initial_plan_state<double>(cfg, 2), cfg,
                                          true, 0.1, rng, &trace);
    CHECK(std::isfinite(res.best_score));
    CHECK(trace.size() == 2);
    for (int c = 0; c < 2; ++c) {
      CHECK(res.action.at(0, c) >= -1.0);
      CHECK(res.action.at(0, c) <= 1.0);
    }
    // Warm start of the result is the shifted solved state.
    for (int h = 0; h < cfg.horizon; ++h)
      for (int c = 0; c < 2; ++c)
        CHECK(res.next.mean.at(h, c) == res.solved.mean.at(h + 1, c));
  }
}
