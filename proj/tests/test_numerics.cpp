#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dcwm/finite_diff.hpp"
#include "dcwm/graph.hpp"
#include "dcwm/mlp.hpp"
#include "dcwm/rng.hpp"

using namespace dcwm;

TEST_CASE("gemm matches a hand-computed product") {
  Mat<double> a(2, 3);
  Mat<double> b(3, 2);
  for (int i = 0; i < 6; ++i) a.data[i] = i + 1;       // [[1,2,3],[4,5,6]]
  for (int i = 0; i < 6; ++i) b.data[i] = 7 + i;       // [[7,8],[9,10],[11,12]]
  Mat<double> c(2, 2);
  gemm<double>(false, false, 1.0, a, b, 0.0, c);
  CHECK(c.at(0, 0) == doctest::Approx(58));
  CHECK(c.at(0, 1) == doctest::Approx(64));
  CHECK(c.at(1, 0) == doctest::Approx(139));
  CHECK(c.at(1, 1) == doctest::Approx(154));

  // transposed-B form used by the linear layer: y = x @ W^T
  Mat<double> w(2, 3);
  for (int i = 0; i < 6; ++i) w.data[i] = 7 + i;
  Mat<double> y(2, 2);
  gemm<double>(false, true, 1.0, a, w, 0.0, y);
  CHECK(y.at(0, 0) == doctest::Approx(1 * 7 + 2 * 8 + 3 * 9));
  CHECK(y.at(1, 1) == doctest::Approx(4 * 10 + 5 * 11 + 6 * 12));
}

TEST_CASE("rng streams are reproducible and distributionally sane") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  Rng r(99);
  double sum = 0, sumsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);

  // Gumbel mean is the Euler-Mascheroni constant.
  double gsum = 0;
  for (int i = 0; i < n; ++i) gsum += r.gumbel();
  CHECK(gsum / n == doctest::Approx(0.5772).epsilon(0.05));

  Rng f1 = Rng(7).fork(1);
  Rng f2 = Rng(7).fork(2);
  CHECK(f1.uniform() != f2.uniform());
}

TEST_CASE("mish golden values") {
  CHECK(mish(0.0) == 0.0);
  CHECK(mish(1.0) == doctest::Approx(0.86509839).epsilon(1e-7));
  CHECK(mish(-1.0) == doctest::Approx(-0.30340147).epsilon(1e-6));
  // large negative inputs decay to zero without overflow
  CHECK(std::abs(mish(-60.0)) < 1e-20);
  CHECK(mish(60.0) == doctest::Approx(60.0));
}

TEST_CASE("layer_norm normalizes rows before the affine") {
  Graph<double> g;
  Rng rng(5);
  Mat<double> x(4, 16);
  for (auto& v : x.data) v = rng.uniform(-3, 3);
  auto xid = g.input(x);
  ParamBlock<double> gain("g", 1, 16), bias("b", 1, 16);
  gain.value.fill(1.0);
  auto y = g.layer_norm(xid, g.param(gain), g.param(bias), 1e-5);
  for (int r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (int c = 0; c < 16; ++c) mean += g.value(y).at(r, c);
    mean /= 16;
    for (int c = 0; c < 16; ++c) {
      const double d = g.value(y).at(r, c) - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts it slightly
  }
}

static Mlp<double> make_mlp(const char* name, MlpSpec spec, uint64_t seed) {
  Mlp<double> m(name, spec);
  Rng rng(seed);
  m.init(rng);
  return m;
}

TEST_CASE("taped forward equals tape-free eval") {
  auto mlp = make_mlp("m", {5, {16, 8}, 3}, 42);
  Rng rng(1);
  Mat<double> x(7, 5);
  for (auto& v : x.data) v = rng.uniform(-2, 2);

  Graph<double> g;
  auto out = mlp.forward(g, g.input(x));
  Mat<double> ev = mlp.eval(x);
  REQUIRE(g.value(out).rows == 7);
  REQUIRE(g.value(out).cols == 3);
  for (size_t i = 0; i < ev.size(); ++i)
    CHECK(g.value(out).data[i] == doctest::Approx(ev.data[i]).epsilon(1e-14));
}

TEST_CASE("mlp gradient matches central finite differences") {
  auto mlp = make_mlp("m", {4, {12, 10}, 2}, 7);
  Rng rng(3);
  Mat<double> x(6, 4);
  for (auto& v : x.data) v = rng.uniform(-1.5, 1.5);

  auto loss_fn = [&]() {
    Mat<double> y = mlp.eval(x);
    double s = 0;
    for (double v : y.data) s += v * v;
    return 0.5 * s;
  };

  // analytic path
  Graph<double> g;
  auto out = mlp.forward(g, g.input(x));
  auto sq = g.square(out);
  auto loss = g.scale(g.sum_all(sq), 0.5);
  CHECK(g.value(loss).data[0] == doctest::Approx(loss_fn()).epsilon(1e-12));
  for (auto* pb : mlp.params()) pb->zero_grad();
  g.backward(loss);

  auto fd = finite_diff_grad<double>(loss_fn, mlp.params(), 1e-5);
  auto blocks = mlp.params();
  for (size_t i = 0; i < blocks.size(); ++i) {
    const double err = max_rel_error(blocks[i]->grad, fd[i]);
    INFO("block ", blocks[i]->name);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("backward twice accumulates parameter gradients exactly twice") {
  auto mlp = make_mlp("m", {3, {8}, 1}, 11);
  Mat<double> x(2, 3);
  x.data = {0.1, -0.4, 0.7, 0.2, 0.0, -0.9};

  Graph<double> g;
  auto loss = g.sum_all(mlp.forward(g, g.input(x)));
  for (auto* pb : mlp.params()) pb->zero_grad();
  g.backward(loss);
  const Mat<double> once = mlp.params()[0]->grad;
  g.backward(loss);
  for (size_t i = 0; i < once.size(); ++i)
    CHECK(mlp.params()[0]->grad.data[i] == doctest::Approx(2.0 * once.data[i]).epsilon(1e-12));
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  auto mlp = make_mlp("m", {3, {8}, 2}, 13);
  Mat<double> x(4, 3);
  x.fill(0.3);
  Graph<double> g;
  auto out = mlp.forward(g, g.input(x));
  for (auto* pb : mlp.params()) pb->zero_grad();
  Mat<double> zeros(4, 2);
  g.backward_from(out, zeros);
  for (auto* pb : mlp.params())
    for (double v : pb->grad.data) CHECK(v == 0.0);
}

TEST_CASE("backward after an optimizer step throws a stale-tape error") {
  auto mlp = make_mlp("m", {3, {8}, 1}, 17);
  Mat<double> x(2, 3);
  x.fill(0.5);
  Graph<double> g;
  auto loss = g.sum_all(mlp.forward(g, g.input(x)));
  g.backward(loss);  // leaves some gradient to step on
  adamw_step(mlp.params(), {});
  CHECK_THROWS_AS(g.backward(loss), ContractError);
}

TEST_CASE("frozen parameters pass gradients through but are never written") {
  auto mlp = make_mlp("m", {3, {8}, 1}, 19);
  Mat<double> x(2, 3);
  x.data = {0.1, 0.2, 0.3, -0.1, -0.2, -0.3};

  Graph<double> g;
  auto xid = g.input(x, /*needs_grad=*/true);
  auto loss = g.sum_all(mlp.forward(g, xid, /*frozen=*/true));
  for (auto* pb : mlp.params()) pb->zero_grad();
  g.backward(loss);
  for (auto* pb : mlp.params())
    for (double v : pb->grad.data) CHECK(v == 0.0);
  // but the input still received a gradient through the frozen stack
  double mag = 0;
  for (double v : g.grad(xid).data) mag += std::abs(v);
  CHECK(mag > 1e-6);
}

TEST_CASE("adamw single step matches hand arithmetic") {
  ParamBlock<double> p("p", 1, 1);
  p.value.data[0] = 1.0;
  p.grad.data[0] = 0.5;
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  adamw_step<double>({&p}, cfg);
  // m=0.05, v=0.00025; mhat=0.5, vhat=0.25; step = 0.01*(0.5/(0.5+1e-8) + 0.1*1.0)
  const double expect = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8) + 0.1 * 1.0);
  CHECK(p.value.data[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(p.grad.data[0] == 0.0);  // grads consumed
  CHECK(p.step_count == 1);
}

TEST_CASE("adamw rejects non-finite gradients, naming the block") {
  ParamBlock<double> p("enc.l0.w", 1, 2);
  p.grad.data[0] = std::nan("");
  try {
    adamw_step<double>({&p}, {});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("enc.l0.w") != std::string::npos);
  }
}

TEST_CASE("linear layer reports dimension mismatches by name") {
  auto mlp = make_mlp("critic0", {4, {8}, 1}, 23);
  Mat<double> bad(2, 5);
  Graph<double> g;
  try {
    mlp.forward(g, g.input(bad));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("critic0") != std::string::npos);
  }
}
