#pragma once

#include <Eigen/Core>

#include <string>

namespace dvector {

/// Row-major so that one frame is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Time-ordered T x D matrix of per-frame features (filterbank or network
/// derived). Speaker and phrase ids are optional metadata.
struct FeatureSequence {
  Matrix frames;
  double frame_shift = 0.010;
  std::string utt_id;
  std::string speaker_id;
  std::string phrase_id;

  Eigen::Index num_frames() const { return frames.rows(); }
  Eigen::Index dim() const { return frames.cols(); }
};

/// Throws NumericError if any entry is NaN or Inf.
void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what);

}  // namespace dvector
