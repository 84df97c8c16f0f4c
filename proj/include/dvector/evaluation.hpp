#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dvector::eval {

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;

  bool operator==(const Trial&) const = default;
};

using TrialList = std::vector<Trial>;

struct ScoreRecord {
  Trial trial;
  double score = 0.0;
};

/// One point of the threshold sweep; a trial is accepted iff
/// score >= threshold.
struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct EerResult {
  double eer = 0.0;  // in [0, 1]
  double threshold = 0.0;
  std::vector<DetPoint> far_frr_curve;
};

/// Lines of `<enroll-id> <test-id> <target|nontarget>`; blank lines skipped.
TrialList load_trials(std::istream& is, const std::string& source_name = "<trials>");
TrialList load_trials(const std::filesystem::path& path);
void write_trials(std::ostream& os, const TrialList& trials);

/// Sweep over every distinct score plus one threshold above the maximum.
/// The first point is (FAR 1, FRR 0), the last (0, 1).
std::vector<DetPoint> det_points(const std::vector<ScoreRecord>& records);

/// EER at the FAR/FRR crossing, linearly interpolated between the adjacent
/// sweep points where FAR - FRR changes sign.
EerResult compute_eer(const std::vector<ScoreRecord>& records);

struct AlphaRow {
  double alpha = 0.0;
  double eer = 0.0;
};

struct SweepResult {
  double best_alpha = 0.0;
  double best_eer = 0.0;
  std::vector<AlphaRow> table;
};

/// alpha in {0, step, 2 step, ..., 1}; the smallest alpha wins ties.
SweepResult sweep_alpha(const std::vector<ScoreRecord>& records_iv,
                        const std::vector<ScoreRecord>& records_dv, double grid_step);

std::vector<double> alpha_grid(double grid_step);

}  // namespace dvector::eval
