#include "dvector/errors.hpp"
#include "dvector/evaluation.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace dvector;
using namespace dvector::eval;

namespace {

std::vector<ScoreRecord> records(const std::vector<double>& tgt, const std::vector<double>& non) {
  std::vector<ScoreRecord> out;
  int k = 0;
  for (double s : tgt) out.push_back({{"m", "t" + std::to_string(k++), true}, s});
  for (double s : non) out.push_back({{"m", "t" + std::to_string(k++), false}, s});
  return out;
}

struct RandomSet {
  std::vector<double> tgt, non;
};

RandomSet random_set(std::mt19937& rng) {
  RandomSet s;
  const int nt = std::uniform_int_distribution<int>(1, 60)(rng);
  const int nn = std::uniform_int_distribution<int>(1, 200)(rng);
  std::normal_distribution<double> g(0, 1);
  std::uniform_int_distribution<int> coarse(0, 6);
  const bool ties = rng() % 2;
  for (int i = 0; i < nt; ++i) s.tgt.push_back(ties ? coarse(rng) * 0.5 + 0.5 : g(rng) + 1.0);
  for (int i = 0; i < nn; ++i) s.non.push_back(ties ? coarse(rng) * 0.5 : g(rng));
  return s;
}

}  // namespace

TEST_CASE("EER examples") {
  CHECK(compute_eer(records({0.9, 0.8, 0.7}, {0.1, 0.2, 0.3})).eer == 0.0);
  CHECK(compute_eer(records({0.1}, {0.9})).eer == 1.0);
  CHECK(compute_eer(records({0.4, 0.6}, {0.3, 0.5})).eer == doctest::Approx(0.5));
  CHECK(compute_eer(records({1, 1}, {1, 1})).eer == doctest::Approx(0.5));
  CHECK_THROWS_AS(compute_eer(records({1}, {})), InputError);
  CHECK_THROWS_AS(compute_eer(records({std::nan("")}, {0})), NumericError);
}

TEST_CASE("det_points runs from (1,0) to (0,1) monotonically") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_set(rng);
    const auto c = det_points(records(s.tgt, s.non));
    CHECK(c.front().far == 1.0);
    CHECK(c.front().frr == 0.0);
    CHECK(c.back().far == 0.0);
    CHECK(c.back().frr == 1.0);
    for (std::size_t k = 1; k < c.size(); ++k) {
      CHECK(c[k].threshold > c[k - 1].threshold);
      CHECK(c[k].far <= c[k - 1].far);
      CHECK(c[k].frr >= c[k - 1].frr);
    }
  }
}

TEST_CASE("EER agrees with the brute-force oracle and is invariant") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const auto s = random_set(rng);
    const double eer = compute_eer(records(s.tgt, s.non)).eer;
    CHECK(std::abs(eer - oracle::brute_force_eer(s.tgt, s.non)) < 1e-9);
    CHECK(eer >= 0.0);
    CHECK(eer <= 1.0);

    auto shifted = records(s.tgt, s.non);
    for (auto& r : shifted) r.score = std::exp(2.0 * r.score) + 3.0;
    CHECK(std::abs(compute_eer(shifted).eer - eer) < 1e-9);

    auto shuffled = records(s.tgt, s.non);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compute_eer(shuffled).eer == eer);

    // Swapping roles of target and nontarget under negation leaves EER fixed.
    std::vector<double> nt, nn;
    for (double v : s.non) nt.push_back(-v);
    for (double v : s.tgt) nn.push_back(-v);
    CHECK(std::abs(compute_eer(records(nt, nn)).eer - eer) < 1e-9);
  }
}

TEST_CASE("alpha_grid") {
  CHECK(alpha_grid(0.05).size() == 21);
  CHECK(alpha_grid(0.5) == std::vector<double>{0, 0.5, 1});
  const auto g = alpha_grid(0.3);
  CHECK(g.back() == 1.0);
  CHECK(g.size() == 5);
  CHECK_THROWS_AS(alpha_grid(0.0), ConfigError);
  CHECK_THROWS_AS(alpha_grid(0.6), ConfigError);
}

TEST_CASE("sweep_alpha finds the complementary-error fusion point") {
  // Shared true score s (1 target, 0 nontarget) plus a nuisance d that
  // enters A with + and B with -: each system alone sits at EER 0.5, the
  // equal mix cancels d exactly.
  const std::vector<double> s{1, 1, 0, 0}, d{20, -20, 20, -20};
  std::vector<ScoreRecord> a, b;
  for (int i = 0; i < 4; ++i) {
    const Trial t{"m", "t" + std::to_string(i), s[i] == 1};
    a.push_back({t, s[i] + d[i]});
    b.push_back({t, s[i] - d[i]});
  }
  const auto res = sweep_alpha(a, b, 0.05);
  CHECK(res.table.size() == 21);
  CHECK(res.best_alpha == doctest::Approx(0.5));
  CHECK(res.best_eer == 0.0);
  CHECK(res.table.front().eer == doctest::Approx(0.5));
  CHECK(res.table.back().eer == doctest::Approx(0.5));
  CHECK(res.table.back().eer == compute_eer(a).eer);
  CHECK(res.table.front().eer == compute_eer(b).eer);

  // Identical systems: every alpha ties, smallest wins.
  const auto same = sweep_alpha(a, a, 0.25);
  CHECK(same.best_alpha == 0.0);

  auto misaligned = b;
  misaligned[0].trial.test_id = "x";
  CHECK_THROWS_AS(sweep_alpha(a, misaligned, 0.1), InputError);
  misaligned.pop_back();
  CHECK_THROWS_AS(sweep_alpha(a, misaligned, 0.1), InputError);
}

TEST_CASE("best fused EER never exceeds either single system") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScoreRecord> a, b;
    for (int i = 0; i < 200; ++i) {
      const bool tgt = i < 40;
      const Trial t{"m", "u" + std::to_string(i), tgt};
      a.push_back({t, (tgt ? 1.0 : 0.0) + g(rng)});
      b.push_back({t, (tgt ? 0.7 : 0.0) + g(rng)});
    }
    const auto res = sweep_alpha(a, b, 0.05);
    CHECK(res.best_eer <= std::min(compute_eer(a).eer, compute_eer(b).eer));
  }
}

TEST_CASE("trial list parsing") {
  std::istringstream ok("m1 u1 target\n\nm1 u2 nontarget\n");
  const auto t = load_trials(ok);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == Trial{"m1", "u1", true});
  CHECK(t[1].target == false);

  std::ostringstream os;
  write_trials(os, t);
  std::istringstream again(os.str());
  CHECK(load_trials(again) == t);

  std::istringstream bad_label("m1 u1 maybe\n");
  CHECK_THROWS_WITH_AS(load_trials(bad_label, "x.txt"), doctest::Contains("line 1"), ParseError);
  std::istringstream short_line("m1 target\n");
  CHECK_THROWS_AS(load_trials(short_line), ParseError);
  CHECK_THROWS_AS(load_trials(std::filesystem::path("/nonexistent/trials")), PathError);
}

TEST_CASE("EER on two-trial examples") {
  CHECK(compute_eer(records({0.9, 0.8}, {0.2, 0.1})).eer == 0.0);
  CHECK(compute_eer(records({0.1, 0.2}, {0.8, 0.9})).eer == 1.0);
  CHECK(compute_eer(records({0.9, 0.1}, {0.8, 0.2})).eer == doctest::Approx(0.5));
  CHECK(oracle::brute_force_eer({0.9, 0.1}, {0.8, 0.2}) == doctest::Approx(0.5));
}

TEST_CASE("separated scores put a sweep point at FAR = FRR = 0") {
  const auto c = det_points(records({0.9, 0.8}, {0.2, 0.1}));
  bool origin = false;
  for (const auto& p : c) origin = origin || (p.far == 0.0 && p.frr == 0.0);
  CHECK(origin);
}

TEST_CASE("empty trial list parses to nothing and cannot be scored") {
  std::istringstream empty("");
  CHECK(load_trials(empty).empty());
  CHECK_THROWS_AS(compute_eer({}), InputError);
}

TEST_CASE("sweep over identical systems") {
  const auto r = records({0.9, 0.3, 0.6}, {0.5, 0.1, 0.7});
  const auto res = sweep_alpha(r, r, 0.5);
  REQUIRE(res.table.size() == 3);
  CHECK(res.table[0].alpha == 0.0);
  CHECK(res.table[1].alpha == 0.5);
  CHECK(res.table[2].alpha == 1.0);
  CHECK(res.best_alpha == 0.0);
  CHECK(res.best_eer == compute_eer(r).eer);
}
