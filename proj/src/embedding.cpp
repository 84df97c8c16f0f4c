#include "dvector/embedding.hpp"

#include "dvector/errors.hpp"

#include <string>

namespace dvector::embedding {
namespace {

// Shared by average_pool and segment_pool so that n = 1 is bit-identical.
Vector mean_rows(const Matrix& frames, Eigen::Index begin, Eigen::Index count) {
  Vector sum = Vector::Zero(frames.cols());
  for (Eigen::Index t = begin; t < begin + count; ++t) sum += frames.row(t).transpose();
  return sum / static_cast<double>(count);
}

void maybe_normalize(Vector& v, bool unit_norm) {
  if (!unit_norm) return;
  const double n = v.norm();
  if (n >= 1e-12) v /= n;
}

}  // namespace

Matrix DVectorSequence::as_matrix() const {
  if (pieces.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(pieces.size()), pieces.front().values.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pieces[i].values.transpose();
  return m;
}

DVectorSequence DVectorSequence::from_matrix(const Matrix& m, std::string utt_id) {
  DVectorSequence seq;
  seq.utt_id = std::move(utt_id);
  for (Eigen::Index i = 0; i < m.rows(); ++i) seq.pieces.push_back({m.row(i).transpose(), seq.utt_id});
  return seq;
}

DVector average_pool(const FeatureSequence& feats, bool unit_norm) {
  if (feats.num_frames() < 1) throw InputError("average_pool: empty feature sequence " + feats.utt_id);
  DVector d{mean_rows(feats.frames, 0, feats.num_frames()), feats.utt_id};
  maybe_normalize(d.values, unit_norm);
  return d;
}

std::vector<Eigen::Index> piece_sizes(Eigen::Index frames, int n) {
  if (n < 1) throw ConfigError("segment count must be >= 1");
  if (frames < n) {
    throw TooShortError("cannot split " + std::to_string(frames) + " frames into " +
                        std::to_string(n) + " pieces");
  }
  std::vector<Eigen::Index> sizes(n, frames / n);
  for (Eigen::Index i = 0; i < frames % n; ++i) ++sizes[i];
  return sizes;
}

DVectorSequence segment_pool(const FeatureSequence& feats, int n, bool unit_norm) {
  const auto sizes = piece_sizes(feats.num_frames(), n);
  DVectorSequence seq;
  seq.utt_id = feats.utt_id;
  seq.piece_frames = sizes;
  Eigen::Index begin = 0;
  for (auto size : sizes) {
    DVector d{mean_rows(feats.frames, begin, size), feats.utt_id};
    maybe_normalize(d.values, unit_norm);
    seq.pieces.push_back(std::move(d));
    begin += size;
  }
  return seq;
}

DVector mean_of(const std::vector<DVector>& vectors, std::string id) {
  if (vectors.empty()) throw InputError("mean_of: no vectors for " + id);
  Vector sum = Vector::Zero(vectors.front().values.size());
  for (const auto& v : vectors) {
    if (v.values.size() != sum.size()) throw ShapeError("mean_of: d-vector dims differ for " + id);
    sum += v.values;
  }
  return {sum / static_cast<double>(vectors.size()), std::move(id)};
}

DVectorSequence mean_of(const std::vector<DVectorSequence>& seqs, std::string id) {
  if (seqs.empty()) throw InputError("mean_of: no sequences for " + id);
  const std::size_t n = seqs.front().size();
  DVectorSequence out;
  out.utt_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<DVector> column;
    for (const auto& s : seqs) {
      if (s.size() != n) throw InputError("mean_of: segment counts differ for " + id);
      column.push_back(s.pieces[i]);
    }
    out.pieces.push_back(mean_of(column, id));
  }
  return out;
}

}  // namespace dvector::embedding
