#include "dvector/evaluation.hpp"

#include "dvector/errors.hpp"
#include "dvector/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dvector::eval {

TrialList load_trials(std::istream& is, const std::string& source_name) {
  TrialList trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Trial t;
    std::string label, extra;
    if (!(ss >> t.enroll_id >> t.test_id >> label) || (ss >> extra)) {
      throw ParseError(source_name + ": line " + std::to_string(line_no) +
                       ": expected '<enroll-id> <test-id> <target|nontarget>'");
    }
    if (label == "target") {
      t.target = true;
    } else if (label != "nontarget") {
      throw ParseError(source_name + ": line " + std::to_string(line_no) + ": unknown label '" +
                       label + "'");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

TrialList load_trials(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw PathError("cannot open trial list: " + path.string());
  return load_trials(is, path.string());
}

void write_trials(std::ostream& os, const TrialList& trials) {
  for (const auto& t : trials) {
    os << t.enroll_id << ' ' << t.test_id << ' ' << (t.target ? "target" : "nontarget") << '\n';
  }
}

std::vector<DetPoint> det_points(const std::vector<ScoreRecord>& records) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(records.size());
  std::size_t n_target = 0;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw NumericError("non-finite score in trial list");
    sorted.emplace_back(r.score, r.trial.target);
    n_target += r.trial.target ? 1 : 0;
  }
  const std::size_t n_nontarget = records.size() - n_target;
  if (n_target == 0 || n_nontarget == 0) {
    throw InputError("EER needs at least one target and one nontarget trial");
  }
  std::sort(sorted.begin(), sorted.end());

  // Walking thresholds upward; everything strictly below the threshold is
  // rejected.
  std::vector<DetPoint> curve;
  std::size_t rejected_targets = 0, rejected_nontargets = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double thr = sorted[i].first;
    curve.push_back({thr, static_cast<double>(n_nontarget - rejected_nontargets) / n_nontarget,
                     static_cast<double>(rejected_targets) / n_target});
    while (i < sorted.size() && sorted[i].first == thr) {
      (sorted[i].second ? rejected_targets : rejected_nontargets)++;
      ++i;
    }
  }
  const double above = std::nextafter(sorted.back().first, std::numeric_limits<double>::infinity());
  curve.push_back({above, 0.0, 1.0});
  return curve;
}

EerResult compute_eer(const std::vector<ScoreRecord>& records) {
  EerResult result;
  result.far_frr_curve = det_points(records);
  const auto& c = result.far_frr_curve;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double diff = c[k].far - c[k].frr;
    if (diff > 0) continue;
    if (diff == 0 || k == 0) {
      result.eer = c[k].far;
      result.threshold = c[k].threshold;
    } else {
      const double da = c[k - 1].far - c[k - 1].frr;
      const double s = da / (da - diff);
      result.eer = c[k - 1].far + s * (c[k].far - c[k - 1].far);
      result.threshold = c[k - 1].threshold + s * (c[k].threshold - c[k - 1].threshold);
    }
    break;
  }
  return result;
}

std::vector<double> alpha_grid(double grid_step) {
  if (!(grid_step > 0 && grid_step <= 0.5)) throw ConfigError("grid_step must be in (0, 0.5]");
  std::vector<double> grid;
  for (int k = 0;; ++k) {
    const double a = k * grid_step;
    if (a > 1.0 + 1e-9) break;
    grid.push_back(std::min(a, 1.0));
  }
  if (grid.back() < 1.0 - 1e-9) grid.push_back(1.0);
  return grid;
}

SweepResult sweep_alpha(const std::vector<ScoreRecord>& records_iv,
                        const std::vector<ScoreRecord>& records_dv, double grid_step) {
  if (records_iv.size() != records_dv.size()) {
    throw InputError("sweep_alpha: score lists have different lengths (" +
                     std::to_string(records_iv.size()) + " vs " + std::to_string(records_dv.size()) + ")");
  }
  for (std::size_t i = 0; i < records_iv.size(); ++i) {
    if (!(records_iv[i].trial == records_dv[i].trial)) {
      throw InputError("sweep_alpha: trial " + std::to_string(i + 1) + " differs between systems");
    }
  }
  SweepResult result;
  std::vector<ScoreRecord> fused = records_iv;
  bool first = true;
  for (double alpha : alpha_grid(grid_step)) {
    const scoring::FusionConfig cfg{alpha};
    for (std::size_t i = 0; i < fused.size(); ++i) {
      fused[i].score = scoring::fuse(records_iv[i].score, records_dv[i].score, cfg);
    }
    const double eer = compute_eer(fused).eer;
    result.table.push_back({alpha, eer});
    if (first || eer < result.best_eer - 1e-12) {
      result.best_alpha = alpha;
      result.best_eer = eer;
      first = false;
    }
  }
  return result;
}

}  // namespace dvector::eval
