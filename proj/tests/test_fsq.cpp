#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dcwm/fsq.hpp"
#include "dcwm/graph.hpp"
#include "dcwm/rng.hpp"

using namespace dcwm;

TEST_CASE("codebook {5,3} enumerates 15 codes with the documented symbol sets") {
  Codebook<double> cb({5, 3});
  CHECK(cb.size() == 15);
  CHECK(cb.channels() == 2);

  // channel 0 admits {-1,-0.5,0,0.5,1}, channel 1 admits {-1,0,1}
  std::set<double> ch0, ch1;
  for (int i = 0; i < 15; ++i) {
    ch0.insert(cb.code(i)[0]);
    ch1.insert(cb.code(i)[1]);
  }
  CHECK(ch0 == std::set<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  CHECK(ch1 == std::set<double>{-1.0, 0.0, 1.0});

  // first row is the most negative code; channel 0 is most significant
  CHECK(cb.code(0)[0] == -1.0);
  CHECK(cb.code(0)[1] == -1.0);
  CHECK(cb.code(1)[0] == -1.0);
  CHECK(cb.code(1)[1] == 0.0);
  CHECK(cb.code(3)[0] == -0.5);
  CHECK(cb.code(14)[0] == 1.0);
  CHECK(cb.code(14)[1] == 1.0);
}

TEST_CASE("index mapping is a bijection over all rows") {
  for (auto levels : {std::vector<int>{5, 3}, std::vector<int>{7, 5, 3}, std::vector<int>{4, 4}}) {
    Codebook<double> cb(levels);
    std::set<int> seen;
    for (int i = 0; i < cb.size(); ++i) {
      const int j = cb.index_of(cb.code(i));
      CHECK(j == i);
      seen.insert(j);
    }
    CHECK(static_cast<int>(seen.size()) == cb.size());
  }
}

TEST_CASE("quantize is idempotent: codes are fixed points under atanh") {
  for (auto levels : {std::vector<int>{5, 3}, std::vector<int>{7, 5}, std::vector<int>{4, 4}}) {
    Codebook<double> cb(levels);
    for (int i = 0; i < cb.size(); ++i)
      for (int j = 0; j < cb.channels(); ++j) {
        const double s = cb.code(i)[j];
        CHECK(cb.quantize_scalar(std::atanh(s), j) == s);
      }
  }
}

TEST_CASE("quantization is monotone per channel and outputs live in the codebook") {
  Codebook<double> cb({5, 3});
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const double a = rng.uniform(-6, 6);
    const double b = rng.uniform(-6, 6);
    for (int j = 0; j < 2; ++j) {
      const double qa = cb.quantize_scalar(std::min(a, b), j);
      const double qb = cb.quantize_scalar(std::max(a, b), j);
      CHECK(qa <= qb);
      CHECK_NOTHROW(cb.digit_of(qa, j));  // valid symbol
    }
  }
}

TEST_CASE("even level counts drop the most negative symbol") {
  Codebook<double> cb({4});
  CHECK(cb.size() == 4);
  std::set<double> syms;
  for (int i = 0; i < 4; ++i) syms.insert(cb.code(i)[0]);
  CHECK(syms == std::set<double>{-0.5, 0.0, 0.5, 1.0});
  CHECK(cb.quantize_scalar(-100.0, 0) == -0.5);  // clamped, not -1
}

TEST_CASE("invalid code rows are rejected") {
  Codebook<double> cb({5, 3});
  const double bad[2] = {0.3, 0.0};  // 0.3 is not a channel-0 symbol
  CHECK_THROWS_AS(cb.index_of(bad), ContractError);
  const double bad2[2] = {0.5, 0.5};  // 0.5 is not a channel-1 symbol
  CHECK_THROWS_AS(cb.index_of(bad2), ContractError);
  CHECK(cb.nearest_index(bad2) == cb.index_of(std::array<double, 2>{0.5, 1.0}.data()));
}

TEST_CASE("straight-through gradient equals the tanh path exactly") {
  Codebook<double> cb({5, 3});
  Rng rng(23);
  Mat<double> x(3, 8);  // d=4 latent dims, 2 channels each
  for (auto& v : x.data) v = rng.uniform(-3, 3);

  Graph<double> g;
  auto xid = g.input(x, /*needs_grad=*/true);
  auto q = g.fsq_ste(xid, cb);

  Mat<double> up(3, 8);
  for (auto& v : up.data) v = rng.uniform(-1, 1);
  g.backward_from(q, up);

  for (size_t i = 0; i < x.size(); ++i) {
    const double th = std::tanh(x.data[i]);
    CHECK(g.grad(xid).data[i] == doctest::Approx(up.data[i] * (1 - th * th)).epsilon(1e-12));
  }

  // forward really does quantize
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(g.value(q).at(r, c) == cb.quantize_scalar(x.at(r, c), c % 2));
}

TEST_CASE("one-hot encoding: distinct codes differ by an L2 distance of sqrt(2)") {
  Codebook<double> cb({5, 3});
  std::vector<int> idx = {0, 7, 14, 7};
  Mat<double> oh = one_hot_encode(cb, idx, 2, 2);
  CHECK(oh.rows == 2);
  CHECK(oh.cols == 2 * 15);
  // row 0 holds codes 0 and 7; row 1 holds 14 and 7
  CHECK(oh.at(0, 0) == 1.0);
  CHECK(oh.at(0, 15 + 7) == 1.0);
  double d2 = 0;  // distance between the two different first-dim encodings
  for (int k = 0; k < 15; ++k) {
    const double diff = oh.at(0, k) - oh.at(1, k);
    d2 += diff * diff;
  }
  CHECK(std::sqrt(d2) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("label encoding maps 1-based labels affinely onto [-1, 1]") {
  Codebook<double> cb({5, 3});
  std::vector<int> idx(15);
  for (int i = 0; i < 15; ++i) idx[i] = i;
  Mat<double> lab = label_encode(cb, idx, 15, 1);
  CHECK(lab.at(0, 0) == -1.0);       // label 1
  CHECK(lab.at(14, 0) == 1.0);       // label 15
  CHECK(lab.at(7, 0) == 0.0);        // label 8, midpoint
  for (int i = 1; i < 15; ++i) {
    CHECK(lab.at(i, 0) > lab.at(i - 1, 0));  // strictly monotone
    CHECK(lab.at(i, 0) - lab.at(i - 1, 0) == doctest::Approx(2.0 / 14));
  }
}

TEST_CASE("active code fraction counts distinct indices") {
  CHECK(active_code_fraction({0, 0, 1}, 15) == doctest::Approx(2.0 / 15));
  std::vector<int> all(15);
  for (int i = 0; i < 15; ++i) all[i] = i;
  CHECK(active_code_fraction(all, 15) == 1.0);
  CHECK_THROWS_AS(active_code_fraction({15}, 15), ContractError);
}

TEST_CASE("codebook CSV dump is stable") {
  Codebook<double> cb({5, 3});
  const std::string csv = cb.to_csv();
  CHECK(csv.substr(0, 12) == "index,c0,c1\n");
  CHECK(csv.find("\n0,-1,-1\n") != std::string::npos);
  CHECK(csv.find("\n7,0,0\n") != std::string::npos);
  CHECK(csv.find("\n14,1,1\n") != std::string::npos);
  // 15 data lines + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
}
