// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// numbers. Usage: acceptance [criterion-number ...]  (default: all).

#include "dvector/commands.hpp"
#include "dvector/evaluation.hpp"
#include "dvector/network.hpp"
#include "dvector/pipeline.hpp"
#include "dvector/scoring.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#ifndef DVECTOR_UNIT_TESTS
#error "DVECTOR_UNIT_TESTS must point at the unit test executable"
#endif

namespace fs = std::filesystem;
using namespace dvector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "dvector_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<eval::ScoreRecord> load_records(const fs::path& scores, const fs::path& trials) {
  std::ifstream is(scores);
  return cli::join_scores(scoring::read_scores(is, scores.string()), eval::load_trials(trials), scores.string(),
                          trials.string());
}

double eer_percent(const fs::path& scores, const fs::path& trials) {
  return 100.0 * eval::compute_eer(load_records(scores, trials)).eer;
}

// 1. Analytic gradient against central differences.
Outcome gradient_check() {
  const auto t0 = Clock::now();
  nnet::NetworkSpec spec;
  spec.input_dim = 8;
  spec.hidden_dims = {10, 8};
  spec.output_dim = 5;
  spec.seed = 2024;
  auto net = nnet::init_network(spec);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  for (auto& l : net.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = 0.3 * g(rng);
  Eigen::MatrixXd x(8, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) labels.push_back(i % 5);

  const auto lg = nnet::loss_and_gradient(net, x, labels);
  const auto params = oracle::all_params(net);
  double worst = 0.0;
  for (const auto& p : params) {
    worst = std::max(worst, oracle::relative_error(p.in(lg.grads), oracle::central_difference(net, p, x, labels, 1e-5)));
  }
  const double secs = seconds_since(t0);
  return {params.size() >= 100 && worst < 1e-4 && secs < 10.0,
          fmt("%zu params, max relative error %.3g, %.2fs", params.size(), worst, secs)};
}

// 2. DTW against exhaustive path enumeration.
Outcome dtw_check() {
  const auto t0 = Clock::now();
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> len(1, 7), dim(1, 5);
  std::normal_distribution<double> g(0, 1);
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const int d = dim(rng);
    auto make = [&](int n) {
      oracle::Seq s(n, std::vector<double>(d));
      for (auto& f : s)
        for (auto& v : f) v = g(rng);
      return s;
    };
    const auto a = make(len(rng));
    const auto b = make(len(rng));
    Matrix ma(a.size(), d), mb(b.size(), d);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (int k = 0; k < d; ++k) ma(i, k) = a[i][k];
    for (std::size_t i = 0; i < b.size(); ++i)
      for (int k = 0; k < d; ++k) mb(i, k) = b[i][k];
    worst = std::max(worst, std::abs(scoring::dtw_align(ma, mb).total_cost - oracle::exhaustive_dtw(a, b).total));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 30.0, fmt("200 pairs, max |cost diff| %.3g, %.2fs", worst, secs)};
}

// 3. EER against a brute-force midpoint sweep, plus monotone invariance.
Outcome eer_check() {
  std::mt19937 rng(11);
  std::normal_distribution<double> g(0, 1);
  double worst = 0.0, worst_inv = 0.0;
  for (int set = 0; set < 100; ++set) {
    const int n = std::uniform_int_distribution<int>(2, 1000)(rng);
    const int n_tgt = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const bool coarse = set % 3 == 0;
    std::vector<double> tgt, non;
    std::vector<eval::ScoreRecord> recs;
    for (int i = 0; i < n; ++i) {
      const bool is_tgt = i < n_tgt;
      double s = g(rng) + (is_tgt ? 1.5 : 0.0);
      if (coarse) s = std::round(s * 4.0) / 4.0;
      (is_tgt ? tgt : non).push_back(s);
      recs.push_back({{"m", "u" + std::to_string(i), is_tgt}, s});
    }
    const double eer = eval::compute_eer(recs).eer;
    worst = std::max(worst, std::abs(eer - oracle::brute_force_eer(tgt, non)));
    for (auto& r : recs) r.score = 3.0 * std::atan(r.score) + 0.5;
    worst_inv = std::max(worst_inv, std::abs(eval::compute_eer(recs).eer - eer));
  }
  return {worst <= 1e-9 && worst_inv <= 1e-9,
          fmt("100 sets, max |EER diff| %.3g, max monotone-transform diff %.3g", worst, worst_inv)};
}

struct SystemScores {
  fs::path trials;
  std::map<std::string, fs::path> scores;
};

// Generates, trains and scores through the same command bodies as `dvec`.
SystemScores run_pipeline(const cli::RunConfig& cfg, const std::string& tag, bool phone_posteriors,
                          const std::vector<std::string>& methods, std::string* train_note = nullptr) {
  const fs::path dir = scratch() / tag;
  fs::create_directories(dir);
  const fs::path corpus = dir / "corpus";
  if (!fs::exists(corpus / "trials.txt")) cli::cmd_gen_data(cfg, corpus);
  const std::string model_name = phone_posteriors ? "pt" : "plain";
  const fs::path model = dir / (model_name + ".dvm");
  const auto res = cli::cmd_train(cfg, corpus, model, phone_posteriors, dir / (model_name + ".log.csv"));
  if (train_note) {
    *train_note = fmt("%zu epochs, CV acc %.3f", res.log.size(), res.log.back().cv_accuracy);
  }
  SystemScores out{corpus / "trials.txt", {}};
  for (const auto& m : methods) {
    std::string safe = m;
    std::replace(safe.begin(), safe.end(), ':', '_');
    const fs::path s = dir / (model_name + "." + safe + ".scores");
    cli::cmd_score(cfg, model, corpus, out.trials, m, s);
    out.scores[m] = s;
  }
  return out;
}

cli::RunConfig default_config() {
  cli::RunConfig cfg;
  cfg.jobs = 1;
  return cfg;
}

SystemScores& default_pt_scores(std::string* note = nullptr) {
  static std::string train_note;
  static SystemScores scores = run_pipeline(default_config(), "default", true, {"avg", "seg:3", "dtw"}, &train_note);
  if (note) *note = train_note;
  return scores;
}

// 4. Trend on the default corpus with the phone-posterior model.
Outcome trend_check() {
  const auto t0 = Clock::now();
  std::string note;
  auto& s = default_pt_scores(&note);
  const double avg = eer_percent(s.scores["avg"], s.trials);
  const double seg = eer_percent(s.scores["seg:3"], s.trials);
  const double dtw = eer_percent(s.scores["dtw"], s.trials);
  const double secs = seconds_since(t0);
  const bool ok = dtw <= seg + 0.5 && seg <= avg + 0.5 && avg < 25.0 && secs < 600.0;
  return {ok, fmt("EER avg %.2f%%, seg:3 %.2f%%, dtw %.2f%% (%s), %.0fs", avg, seg, dtw, note.c_str(), secs)};
}

// 5. Phone posteriors help when phone variation dominates.
Outcome phone_dependent_check() {
  auto cfg = default_config();
  cfg.synth.phone_scale = 3.0 * cfg.synth.speaker_scale;
  std::string plain_note, pt_note;
  const auto plain = run_pipeline(cfg, "phone3x", false, {"avg"}, &plain_note);
  const auto pt = run_pipeline(cfg, "phone3x", true, {"avg"}, &pt_note);
  const double e_plain = eer_percent(plain.scores.at("avg"), plain.trials);
  const double e_pt = eer_percent(pt.scores.at("avg"), pt.trials);
  return {e_pt <= e_plain + 0.5, fmt("phone_scale %.2f: plain avg EER %.2f%% (%s), PT avg EER %.2f%% (%s)",
                                     cfg.synth.phone_scale, e_plain, plain_note.c_str(), e_pt, pt_note.c_str())};
}

// 6. Fusion sweep never loses to either input system.
Outcome fusion_check() {
  auto& s = default_pt_scores();
  const auto a = load_records(s.scores["avg"], s.trials);
  const auto b = load_records(s.scores["dtw"], s.trials);
  const auto sweep = eval::sweep_alpha(a, b, 0.05);
  const double ea = eval::compute_eer(a).eer, eb = eval::compute_eer(b).eer;

  // Two constructed systems with opposite nuisance terms: x = s + d and
  // y = s - d, so each alone confuses classes and the equal mix cancels d.
  std::vector<eval::ScoreRecord> x, y;
  std::mt19937 rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int i = 0; i < 400; ++i) {
    const bool tgt = i % 4 == 0;
    const double truth = tgt ? 1.0 : 0.0;
    const double d = 2.0 * g(rng);
    const eval::Trial t{"m", "u" + std::to_string(i), tgt};
    x.push_back({t, truth + d});
    y.push_back({t, truth - d});
  }
  const auto synth_sweep = eval::sweep_alpha(x, y, 0.05);
  const double ex = eval::compute_eer(x).eer, ey = eval::compute_eer(y).eer;
  const bool ok = sweep.best_eer <= std::min(ea, eb) && synth_sweep.best_eer <= std::min(ex, ey);
  return {ok, fmt("avg+dtw: best %.2f%% at alpha %.2f (avg %.2f%%, dtw %.2f%%); constructed: best %.2f%% at alpha "
                  "%.2f (%.2f%%, %.2f%%)",
                  100 * sweep.best_eer, sweep.best_alpha, 100 * ea, 100 * eb, 100 * synth_sweep.best_eer,
                  synth_sweep.best_alpha, 100 * ex, 100 * ey)};
}

// 7. Byte-identical artifacts on rerun.
Outcome determinism_check() {
  auto cfg = default_config();
  cfg.train.max_epochs = 2;
  std::vector<std::string> mismatches;
  std::vector<fs::path> dirs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = scratch() / ("determinism" + std::to_string(run));
    fs::create_directories(dir);
    cli::cmd_gen_data(cfg, dir / "corpus");
    cli::cmd_train(cfg, dir / "corpus", dir / "pt.dvm", true, dir / "pt.log.csv");
    for (const char* m : {"avg", "seg:3", "dtw"}) {
      std::string safe = m;
      std::replace(safe.begin(), safe.end(), ':', '_');
      cli::cmd_score(cfg, dir / "pt.dvm", dir / "corpus", dir / "corpus" / "trials.txt", m, dir / (safe + ".scores"));
    }
    dirs.push_back(dir);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dirs[0]);
    ++compared;
    if (slurp(entry.path()) != slurp(dirs[1] / rel)) mismatches.push_back(rel.string());
  }
  std::string detail = fmt("%zu files compared", compared);
  for (const auto& m : mismatches) detail += ", differs: " + m;
  return {mismatches.empty() && compared > 10, detail};
}

// 8. Invariant property suites (the unit test binary).
Outcome property_check() {
  const std::string cmd = std::string(DVECTOR_UNIT_TESTS) + " --minimal > " + (scratch() / "unit.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  return {ok, ok ? "unit and property suites pass" : "unit suite failed, see " + (scratch() / "unit.txt").string()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient finite-difference check", gradient_check},
      {"DTW vs exhaustive path enumeration", dtw_check},
      {"EER vs brute-force sweep and monotone invariance", eer_check},
      {"default corpus trend dtw <= seg:3 <= avg", trend_check},
      {"phone posteriors at phone_scale = 3 x speaker_scale", phone_dependent_check},
      {"fusion sweep best <= either system", fusion_check},
      {"determinism of gen-data, train, score", determinism_check},
      {"invariant property suites", property_check},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
