#include "dvector/synthdata.hpp"

#include "dvector/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace dvector::synth {
namespace {

Vector draw_gaussian(std::mt19937_64& rng, int dim, double scale) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = scale * dist(rng);
  return v;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_speakers < 1 || n_phrases < 1 || phones_per_phrase < 1 || utterances_per_speaker_phrase < 1 ||
      feature_dim < 1 || phone_set_size < 1 || frames_per_phone < 1) {
    throw ConfigError("synth: all counts must be >= 1");
  }
  if (frames_jitter < 0) throw ConfigError("synth.frames_jitter must be >= 0");
  if (speaker_scale < 0 || phone_scale < 0 || session_scale < 0 || noise_scale < 0) {
    throw ConfigError("synth: scales must be >= 0");
  }
  if (phones_per_phrase > phone_set_size) {
    throw ConfigError("synth.phones_per_phrase must not exceed phone_set_size");
  }
}

std::string speaker_name(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", speaker);
  return buf;
}

std::string phrase_name(int phrase) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%d", phrase + 1);
  return buf;
}

std::string utterance_name(int speaker, int phrase, int session) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%s_s%02d", speaker_name(speaker).c_str(),
                phrase_name(phrase).c_str(), session);
  return buf;
}

SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthCorpus corpus;
  corpus.config = cfg;

  std::vector<Vector> speakers, phones;
  for (int s = 0; s < cfg.n_speakers; ++s) speakers.push_back(draw_gaussian(rng, cfg.feature_dim, cfg.speaker_scale));
  for (int p = 0; p < cfg.phone_set_size; ++p) phones.push_back(draw_gaussian(rng, cfg.feature_dim, cfg.phone_scale));

  std::vector<int> inventory(cfg.phone_set_size);
  std::iota(inventory.begin(), inventory.end(), 0);
  for (int ph = 0; ph < cfg.n_phrases; ++ph) {
    // Partial Fisher-Yates: the first phones_per_phrase entries are distinct.
    for (int k = 0; k < cfg.phones_per_phrase; ++k) {
      std::uniform_int_distribution<int> pick(k, cfg.phone_set_size - 1);
      std::swap(inventory[k], inventory[pick(rng)]);
    }
    corpus.phrase_phones.emplace_back(inventory.begin(), inventory.begin() + cfg.phones_per_phrase);
  }

  std::uniform_int_distribution<int> jitter(-cfg.frames_jitter, cfg.frames_jitter);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < cfg.n_speakers; ++s) {
    for (int ph = 0; ph < cfg.n_phrases; ++ph) {
      for (int sess = 0; sess < cfg.utterances_per_speaker_phrase; ++sess) {
        Utterance utt;
        utt.utt_id = utterance_name(s, ph, sess);
        utt.speaker = s;
        utt.phrase = ph;
        utt.session = sess;
        const Vector session = draw_gaussian(rng, cfg.feature_dim, cfg.session_scale);
        for (int phone : corpus.phrase_phones[ph]) {
          const int dur = std::max(1, cfg.frames_per_phone + jitter(rng));
          utt.phone_labels.insert(utt.phone_labels.end(), dur, phone);
        }
        const auto frames = static_cast<Eigen::Index>(utt.phone_labels.size());
        utt.feats.frames.resize(frames, cfg.feature_dim);
        for (Eigen::Index t = 0; t < frames; ++t) {
          auto row = utt.feats.frames.row(t);
          row = (speakers[s] + phones[utt.phone_labels[t]] + session).transpose();
          for (int d = 0; d < cfg.feature_dim; ++d) row(d) += cfg.noise_scale * unit(rng);
        }
        utt.feats.utt_id = utt.utt_id;
        utt.feats.speaker_id = speaker_name(s);
        utt.feats.phrase_id = phrase_name(ph);
        corpus.utterances.push_back(std::move(utt));
      }
    }
  }
  return corpus;
}

Matrix oracle_posteriors(const std::vector<int>& phone_labels, int phone_set_size, double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("posterior smoothing must be in [0, 1)");
  if (phone_set_size < 1) throw ConfigError("phone set must be non-empty");
  const double off = phone_set_size > 1 ? smoothing / (phone_set_size - 1) : 0.0;
  const double on = phone_set_size > 1 ? 1.0 - smoothing : 1.0;
  Matrix post = Matrix::Constant(static_cast<Eigen::Index>(phone_labels.size()), phone_set_size, off);
  for (std::size_t t = 0; t < phone_labels.size(); ++t) {
    const int p = phone_labels[t];
    if (p < 0 || p >= phone_set_size) throw LabelError("phone label " + std::to_string(p) + " out of range");
    post(static_cast<Eigen::Index>(t), p) = on;
  }
  return post;
}

std::vector<Matrix> oracle_posteriors(const SynthCorpus& corpus, double smoothing) {
  std::vector<Matrix> out;
  out.reserve(corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    out.push_back(oracle_posteriors(u.phone_labels, corpus.config.phone_set_size, smoothing));
  }
  return out;
}

void ProtocolConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("protocol.train_fraction must be in (0, 1)");
  if (!(cv_fraction > 0.0 && cv_fraction < 1.0)) throw ConfigError("protocol.cv_fraction must be in (0, 1)");
  if (enroll_per_model < 1) throw ConfigError("protocol.enroll_per_model must be >= 1");
}

Protocol split_protocol(const SynthCorpus& corpus, const ProtocolConfig& cfg) {
  cfg.validate();
  const SynthConfig& sc = corpus.config;
  const int n_train = static_cast<int>(std::floor(cfg.train_fraction * sc.n_speakers + 0.5));
  if (n_train < 1 || n_train >= sc.n_speakers) {
    throw ConfigError("protocol: " + std::to_string(sc.n_speakers) + " speakers with train_fraction " +
                      std::to_string(cfg.train_fraction) + " leave an empty train or eval split");
  }
  if (sc.utterances_per_speaker_phrase <= cfg.enroll_per_model) {
    throw ConfigError("protocol: need more than enroll_per_model utterances per (speaker, phrase)");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> speakers(sc.n_speakers);
  std::iota(speakers.begin(), speakers.end(), 0);
  std::shuffle(speakers.begin(), speakers.end(), rng);

  Protocol proto;
  proto.train_speakers.assign(speakers.begin(), speakers.begin() + n_train);
  proto.eval_speakers.assign(speakers.begin() + n_train, speakers.end());
  std::sort(proto.train_speakers.begin(), proto.train_speakers.end());
  std::sort(proto.eval_speakers.begin(), proto.eval_speakers.end());

  std::vector<char> is_train(sc.n_speakers, 0);
  for (int s : proto.train_speakers) is_train[s] = 1;

  std::vector<std::size_t> train_pool;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    (is_train[corpus.utterances[i].speaker] ? train_pool : proto.eval_utts).push_back(i);
  }
  std::shuffle(train_pool.begin(), train_pool.end(), rng);
  const auto n_cv = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(cfg.cv_fraction * train_pool.size() + 0.5)), 1,
      train_pool.size() - 1);
  proto.cv_utts.assign(train_pool.begin(), train_pool.begin() + static_cast<std::ptrdiff_t>(n_cv));
  proto.train_utts.assign(train_pool.begin() + static_cast<std::ptrdiff_t>(n_cv), train_pool.end());
  std::sort(proto.cv_utts.begin(), proto.cv_utts.end());
  std::sort(proto.train_utts.begin(), proto.train_utts.end());

  for (int ph = 0; ph < sc.n_phrases; ++ph) {
    std::vector<const Utterance*> tests;
    const std::size_t first_model = proto.models.size();
    for (int s : proto.eval_speakers) {
      EnrollModel model;
      model.model_id = speaker_name(s) + "_" + phrase_name(ph);
      model.speaker = s;
      model.phrase = ph;
      for (std::size_t i : proto.eval_utts) {
        const Utterance& u = corpus.utterances[i];
        if (u.speaker != s || u.phrase != ph) continue;
        if (u.session < cfg.enroll_per_model) {
          model.utt_ids.push_back(u.utt_id);
        } else {
          tests.push_back(&u);
        }
      }
      proto.models.push_back(std::move(model));
    }
    for (std::size_t m = first_model; m < proto.models.size(); ++m) {
      for (const Utterance* u : tests) {
        proto.trials.push_back({proto.models[m].model_id, u->utt_id, u->speaker == proto.models[m].speaker, ph});
      }
    }
  }
  return proto;
}

}  // namespace dvector::synth
