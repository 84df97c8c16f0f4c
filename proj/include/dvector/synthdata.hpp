#pragma once

// Synthetic text-dependent corpus generated directly in feature space.
//
// Every frame is the sum of four factors plus noise:
//
//   x_t = v_speaker + u_phone(t) + w_session + e_t
//
// with v ~ N(0, speaker_scale^2 I), u ~ N(0, phone_scale^2 I),
// w ~ N(0, session_scale^2 I) drawn once per utterance and
// e_t ~ N(0, noise_scale^2 I). A phrase is a fixed sequence of distinct
// phones; each utterance draws per-phone durations around frames_per_phone.

#include "dvector/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dvector::synth {

struct SynthConfig {
  int n_speakers = 28;
  int n_phrases = 2;
  int phones_per_phrase = 5;
  int utterances_per_speaker_phrase = 15;
  int feature_dim = 20;
  int phone_set_size = 11;
  int frames_per_phone = 10;
  int frames_jitter = 5;  // durations uniform in mean +/- jitter, at least 1
  double speaker_scale = 1.0;
  double phone_scale = 3.0;
  double session_scale = 0.3;
  double noise_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Utterance {
  std::string utt_id;
  int speaker = 0;
  int phrase = 0;
  int session = 0;
  FeatureSequence feats;
  std::vector<int> phone_labels;  // one per frame
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<std::vector<int>> phrase_phones;  // phone sequence per phrase
  std::vector<Utterance> utterances;
};

std::string speaker_name(int speaker);
std::string phrase_name(int phrase);
std::string utterance_name(int speaker, int phrase, int session);

SynthCorpus generate(const SynthConfig& cfg);

/// (1 - smoothing) on the true phone, smoothing / (P - 1) elsewhere.
Matrix oracle_posteriors(const std::vector<int>& phone_labels, int phone_set_size, double smoothing);
std::vector<Matrix> oracle_posteriors(const SynthCorpus& corpus, double smoothing);

struct ProtocolConfig {
  double train_fraction = 0.7143;  // 20 of 28 speakers by default
  double cv_fraction = 0.1;
  int enroll_per_model = 3;
  std::uint64_t seed = 2;

  void validate() const;
};

/// An enrollment model: one (speaker, phrase) pair, backed by several
/// enrollment utterances whose representations are averaged at scoring time.
struct EnrollModel {
  std::string model_id;
  int speaker = 0;
  int phrase = 0;
  std::vector<std::string> utt_ids;
};

struct ProtocolTrial {
  std::string enroll_id;  // model id
  std::string test_id;    // utterance id
  bool target = false;
  int phrase = 0;
};

struct Protocol {
  std::vector<int> train_speakers;  // sorted
  std::vector<int> eval_speakers;   // sorted
  std::vector<std::size_t> train_utts;  // indices into corpus.utterances
  std::vector<std::size_t> cv_utts;
  std::vector<std::size_t> eval_utts;
  std::vector<EnrollModel> models;
  std::vector<ProtocolTrial> trials;
};

/// Speaker-disjoint train/eval split; CV carved from training utterances;
/// per-phrase trials of every eval test utterance against every enrollment
/// model of the same phrase.
Protocol split_protocol(const SynthCorpus& corpus, const ProtocolConfig& cfg);

}  // namespace dvector::synth
