#pragma once

// Glue between the modules: the on-disk corpus layout, frame-level dataset
// assembly, trial scoring by method, and the EER report.

#include "dvector/config.hpp"
#include "dvector/embedding.hpp"
#include "dvector/evaluation.hpp"
#include "dvector/network.hpp"
#include "dvector/synthdata.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dvector::cli {

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string phrase_id;
  int session = 0;
};

/// A corpus directory contains:
///   manifest.txt     `<utt-id> <speaker-id> <phrase-id> <session>`
///   feats.dvf        T x D features per utterance
///   labels.dvf       T x 1 phone labels per utterance
///   posteriors.dvf   T x P phone posteriors per utterance
///   train.list cv.list eval.list   one utterance id per line
///   enroll.map       `<model-id> <utt-id> ...`
///   trials.txt       `<model-id> <utt-id> <target|nontarget>`
struct CorpusData {
  std::vector<ManifestEntry> manifest;
  std::vector<FeatureSequence> feats;
  std::vector<std::vector<int>> labels;
  std::vector<Matrix> posteriors;
  std::vector<std::string> train_ids, cv_ids, eval_ids;
  std::map<std::string, std::vector<std::string>> enroll_map;
  eval::TrialList trials;

  std::size_t index_of(const std::string& utt_id) const;  // throws DataError
  bool has_utterance(const std::string& utt_id) const;
  int posterior_dim() const;
  void build_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

CorpusData corpus_from_synth(const synth::SynthCorpus& corpus, const synth::Protocol& proto,
                             double posterior_smoothing);
void write_corpus(const std::filesystem::path& dir, const CorpusData& data);
CorpusData read_corpus(const std::filesystem::path& dir);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Context-stacked acoustic input, with posteriors appended when the
/// network is phone dependent. T x input_dim.
Matrix network_inputs(const nnet::NetworkSpec& spec, const FeatureSequence& feats,
                      const Matrix* posteriors, int context_left, int context_right);

struct TrainingData {
  nnet::Dataset train;
  nnet::Dataset cv;
  std::vector<std::string> speakers;  // label index -> speaker id
};

/// Builds the spec for a corpus: input dim from feature dim and context
/// (plus P when phone_dependent), output dim from the training speakers.
nnet::NetworkSpec network_spec_for(const RunConfig& cfg, const CorpusData& data, bool phone_dependent);
TrainingData build_training_data(const RunConfig& cfg, const CorpusData& data,
                                 const nnet::NetworkSpec& spec);

/// init_network + train on the corpus's train/cv lists.
nnet::TrainResult train_on_corpus(const RunConfig& cfg, const CorpusData& data, bool phone_dependent);

enum class Method { Average, Segment, Dtw };

struct ScoringMethod {
  Method method = Method::Average;
  int segments = 1;

  /// "avg", "seg:<n>" or "dtw".
  static ScoringMethod parse(const std::string& token);
  std::string str() const;
};

/// Frame features for each utterance id, through the network.
std::unordered_map<std::string, Matrix> extract_features(const RunConfig& cfg, const nnet::Network& net,
                                                          const CorpusData& data,
                                                          const std::vector<std::string>& utt_ids);

/// Scores trials in order. Enrollment ids are resolved through the enroll
/// map, or as single utterances.
std::vector<eval::ScoreRecord> score_trials(const RunConfig& cfg, const nnet::Network& net,
                                            const CorpusData& data, const eval::TrialList& trials,
                                            const ScoringMethod& method);

struct EerRow {
  std::string phrase;  // "all" for the pooled row
  std::string system;
  double eer_percent = 0.0;
  double threshold = 0.0;
};

/// Per-phrase rows (when test ids resolve to phrases) followed by "all".
std::vector<EerRow> eer_report(const std::vector<eval::ScoreRecord>& records, const std::string& system,
                               const std::unordered_map<std::string, std::string>& phrase_of_test);
void write_eer_table(std::ostream& os, const std::vector<EerRow>& rows);
void write_eer_csv(std::ostream& os, const std::vector<EerRow>& rows);
std::vector<EerRow> read_eer_csv(std::istream& is);

/// Joins scores with labels line by line; ids must match.
std::vector<eval::ScoreRecord> join_scores(const std::vector<scoring::ScoreLine>& scores,
                                           const eval::TrialList& trials, const std::string& score_name,
                                           const std::string& trial_name);

}  // namespace dvector::cli
