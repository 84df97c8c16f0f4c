#include "dvector/scoring.hpp"

#include "dvector/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dvector::scoring {

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double segment_score(const embedding::DVectorSequence& enroll,
                     const embedding::DVectorSequence& test) {
  if (enroll.size() != test.size() || enroll.size() == 0) {
    throw InputError("segment_score: piece counts differ (" + std::to_string(enroll.size()) +
                     " vs " + std::to_string(test.size()) + ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < enroll.size(); ++i) {
    sum += cosine(enroll.pieces[i].values, test.pieces[i].values);
  }
  return sum / static_cast<double>(enroll.size());
}

DtwAlignment dtw_align(const Matrix& enroll, const Matrix& test, const DtwConfig& cfg) {
  const Eigen::Index n1 = enroll.rows();
  const Eigen::Index n2 = test.rows();
  if (n1 < 1 || n2 < 1) throw InputError("dtw: empty sequence");
  if (enroll.cols() != test.cols()) throw ShapeError("dtw: feature dims differ");
  if (cfg.band < 0) throw ConfigError("dtw band must be >= 0");

  // Frame cost 1 - cosine, with row norms precomputed.
  Vector norm1 = enroll.rowwise().norm();
  Vector norm2 = test.rowwise().norm();
  const Matrix dots = enroll * test.transpose();
  auto cost = [&](Eigen::Index i, Eigen::Index j) {
    if (norm1(i) < 1e-12 || norm2(j) < 1e-12) return 1.0;
    return 1.0 - std::clamp(dots(i, j) / (norm1(i) * norm2(j)), -1.0, 1.0);
  };

  const Eigen::Index band = cfg.band > 0 ? std::max<Eigen::Index>(cfg.band, std::abs(n1 - n2)) : 0;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev_cost(n2, inf), cur_cost(n2, inf);
  std::vector<int> prev_len(n2, 0), cur_len(n2, 0);

  for (Eigen::Index i = 0; i < n1; ++i) {
    std::fill(cur_cost.begin(), cur_cost.end(), inf);
    for (Eigen::Index j = 0; j < n2; ++j) {
      if (band > 0 && std::abs(i - j) > band) continue;
      if (i == 0 && j == 0) {
        cur_cost[0] = cost(0, 0);
        cur_len[0] = 1;
        continue;
      }
      // Candidates in tie-break order: diagonal, (i-1, j), (i, j-1).
      double best = inf;
      int best_len = 0;
      if (i > 0 && j > 0 && prev_cost[j - 1] < best) {
        best = prev_cost[j - 1];
        best_len = prev_len[j - 1];
      }
      if (i > 0 && prev_cost[j] < best) {
        best = prev_cost[j];
        best_len = prev_len[j];
      }
      if (j > 0 && cur_cost[j - 1] < best) {
        best = cur_cost[j - 1];
        best_len = cur_len[j - 1];
      }
      if (best == inf) continue;
      cur_cost[j] = best + cost(i, j);
      cur_len[j] = best_len + 1;
    }
    std::swap(prev_cost, cur_cost);
    std::swap(prev_len, cur_len);
  }
  return {prev_cost[n2 - 1], prev_len[n2 - 1]};
}

double dtw_score(const Matrix& enroll, const Matrix& test, const DtwConfig& cfg) {
  return 1.0 - dtw_align(enroll, test, cfg).normalized_cost();
}

double dtw_score(const FeatureSequence& enroll, const FeatureSequence& test, const DtwConfig& cfg) {
  return dtw_score(enroll.frames, test.frames, cfg);
}

void FusionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("fusion alpha must be in [0, 1]");
}

double fuse(double s_iv, double s_dv, const FusionConfig& cfg) {
  cfg.validate();
  return cfg.alpha * s_iv + (1.0 - cfg.alpha) * s_dv;
}

std::vector<double> min_max_normalize(const std::vector<double>& scores) {
  if (scores.empty()) return {};
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  std::vector<double> out(scores.size(), 0.0);
  if (range <= 0) return out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - *lo) / range;
  return out;
}

void write_scores(std::ostream& os, const std::vector<ScoreLine>& scores) {
  char buf[64];
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw NumericError("non-finite score for " + s.enroll_id + " " + s.test_id);
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    os << s.enroll_id << ' ' << s.test_id << ' ' << buf << '\n';
  }
}

std::vector<ScoreLine> read_scores(std::istream& is, const std::string& source_name) {
  std::vector<ScoreLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    ScoreLine s;
    std::string extra;
    if (!(ss >> s.enroll_id >> s.test_id >> s.score) || (ss >> extra)) {
      throw ParseError(source_name + ":" + std::to_string(line_no) +
                       ": expected '<enroll-id> <test-id> <score>'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dvector::scoring
