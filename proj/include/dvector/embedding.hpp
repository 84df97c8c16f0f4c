#pragma once

#include "dvector/types.hpp"

#include <string>
#include <vector>

namespace dvector::embedding {

struct DVector {
  Vector values;
  std::string utt_id;
};

/// One d-vector per contiguous piece of the utterance, in time order.
struct DVectorSequence {
  std::vector<DVector> pieces;
  std::vector<Eigen::Index> piece_frames;  // frames pooled into each piece
  std::string utt_id;

  std::size_t size() const { return pieces.size(); }
  /// n x H matrix, one piece per row (archive layout).
  Matrix as_matrix() const;
  static DVectorSequence from_matrix(const Matrix& m, std::string utt_id);
};

/// Element-wise mean over frames. Throws InputError on an empty sequence.
DVector average_pool(const FeatureSequence& feats, bool unit_norm = false);

/// Piece sizes for splitting T frames into n pieces; the first T mod n pieces
/// get one extra frame.
std::vector<Eigen::Index> piece_sizes(Eigen::Index frames, int n);

/// Splits into n contiguous pieces and average-pools each.
/// Throws TooShortError when T < n.
DVectorSequence segment_pool(const FeatureSequence& feats, int n, bool unit_norm = false);

/// Element-wise mean of several d-vectors of the same dimension.
DVector mean_of(const std::vector<DVector>& vectors, std::string id);
/// Piece-wise mean of sequences with the same n.
DVectorSequence mean_of(const std::vector<DVectorSequence>& seqs, std::string id);

}  // namespace dvector::embedding
