#pragma once

#include "dvector/embedding.hpp"
#include "dvector/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dvector::scoring {

/// a.b / (|a| |b|); 0 when either norm is below 1e-12.
double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Mean piece-wise cosine. Both sequences must have the same piece count.
double segment_score(const embedding::DVectorSequence& enroll,
                     const embedding::DVectorSequence& test);

/// DTW over frame cost 1 - cosine with steps (1,0), (0,1), (1,1). The path
/// runs from (0,0) to (T1-1, T2-1); cost is normalized by the number of
/// cells on the chosen path. Ties in the predecessor choice prefer the
/// diagonal, then (i-1, j), then (i, j-1).
struct DtwConfig {
  /// Sakoe-Chiba half-width in frames; 0 disables the band. The band is
  /// widened to |T1 - T2| when narrower so that a path always exists.
  int band = 0;
};

struct DtwAlignment {
  double total_cost = 0.0;
  int path_cells = 0;
  double normalized_cost() const { return total_cost / path_cells; }
};

DtwAlignment dtw_align(const Matrix& enroll, const Matrix& test, const DtwConfig& cfg = {});

/// 1 - normalized path cost; higher means more similar.
double dtw_score(const Matrix& enroll, const Matrix& test, const DtwConfig& cfg = {});
double dtw_score(const FeatureSequence& enroll, const FeatureSequence& test,
                 const DtwConfig& cfg = {});

struct FusionConfig {
  double alpha = 0.5;
  void validate() const;
};

/// alpha * s_iv + (1 - alpha) * s_dv.
double fuse(double s_iv, double s_dv, const FusionConfig& cfg);

/// Rescales scores to [0, 1]; constant lists map to 0.
std::vector<double> min_max_normalize(const std::vector<double>& scores);

struct ScoreLine {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
};

/// `<enroll-id> <test-id> <score>`, score with 6 decimals.
void write_scores(std::ostream& os, const std::vector<ScoreLine>& scores);
std::vector<ScoreLine> read_scores(std::istream& is, const std::string& source_name);

}  // namespace dvector::scoring
