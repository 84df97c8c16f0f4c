#include "dvector/pipeline.hpp"

#include "dvector/archive.hpp"
#include "dvector/errors.hpp"
#include "dvector/frontend.hpp"
#include "dvector/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace dvector::cli {
namespace fs = std::filesystem;

namespace {

// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index is
// independent, so results do not depend on the thread count.
template <typename F>
void parallel_for(std::size_t n, int jobs, F body) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw PathError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw PathError("cannot open: " + path.string());
  return is;
}

void write_list(const fs::path& path, const std::vector<std::string>& ids) {
  auto os = open_out(path);
  for (const auto& id : ids) os << id << '\n';
}

std::vector<std::string> read_list(const fs::path& path) {
  auto is = open_in(path);
  std::vector<std::string> ids;
  std::string id;
  while (is >> id) ids.push_back(id);
  return ids;
}

}  // namespace

std::size_t CorpusData::index_of(const std::string& utt_id) const {
  const auto it = index_.find(utt_id);
  if (it == index_.end()) throw DataError("unknown utterance id '" + utt_id + "'");
  return it->second;
}

bool CorpusData::has_utterance(const std::string& utt_id) const { return index_.contains(utt_id); }

int CorpusData::posterior_dim() const {
  return posteriors.empty() ? 0 : static_cast<int>(posteriors.front().cols());
}

void CorpusData::build_index() {
  index_.clear();
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!index_.emplace(manifest[i].utt_id, i).second) {
      throw DataError("duplicate utterance id '" + manifest[i].utt_id + "'");
    }
  }
}

CorpusData corpus_from_synth(const synth::SynthCorpus& corpus, const synth::Protocol& proto,
                             double posterior_smoothing) {
  CorpusData data;
  for (const auto& u : corpus.utterances) {
    data.manifest.push_back({u.utt_id, synth::speaker_name(u.speaker), synth::phrase_name(u.phrase), u.session});
    data.feats.push_back(u.feats);
    data.labels.push_back(u.phone_labels);
  }
  data.posteriors = synth::oracle_posteriors(corpus, posterior_smoothing);
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(corpus.utterances[i].utt_id);
    return out;
  };
  data.train_ids = ids(proto.train_utts);
  data.cv_ids = ids(proto.cv_utts);
  data.eval_ids = ids(proto.eval_utts);
  for (const auto& m : proto.models) data.enroll_map[m.model_id] = m.utt_ids;
  for (const auto& t : proto.trials) data.trials.push_back({t.enroll_id, t.test_id, t.target});
  data.build_index();
  return data;
}

void write_corpus(const fs::path& dir, const CorpusData& data) {
  {
    auto os = open_out(dir / "manifest.txt");
    for (const auto& m : data.manifest) {
      os << m.utt_id << ' ' << m.speaker_id << ' ' << m.phrase_id << ' ' << m.session << '\n';
    }
  }
  std::vector<io::ArchiveRecord> feats, labels, posts;
  for (std::size_t i = 0; i < data.manifest.size(); ++i) {
    const auto& id = data.manifest[i].utt_id;
    feats.push_back({id, data.feats[i].frames});
    Matrix lab(static_cast<Eigen::Index>(data.labels[i].size()), 1);
    for (std::size_t t = 0; t < data.labels[i].size(); ++t) lab(static_cast<Eigen::Index>(t), 0) = data.labels[i][t];
    labels.push_back({id, std::move(lab)});
    if (!data.posteriors.empty()) posts.push_back({id, data.posteriors[i]});
  }
  io::write_archive(dir / "feats.dvf", feats);
  io::write_archive(dir / "labels.dvf", labels);
  if (!posts.empty()) io::write_archive(dir / "posteriors.dvf", posts);
  write_list(dir / "train.list", data.train_ids);
  write_list(dir / "cv.list", data.cv_ids);
  write_list(dir / "eval.list", data.eval_ids);
  {
    auto os = open_out(dir / "enroll.map");
    for (const auto& [model, utts] : data.enroll_map) {
      os << model;
      for (const auto& u : utts) os << ' ' << u;
      os << '\n';
    }
  }
  auto os = open_out(dir / "trials.txt");
  eval::write_trials(os, data.trials);
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  auto is = open_in(path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    ManifestEntry e;
    if (!(ss >> e.utt_id >> e.speaker_id >> e.phrase_id >> e.session)) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                       ": expected '<utt-id> <speaker-id> <phrase-id> <session>'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

CorpusData read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw PathError("corpus directory not found: " + dir.string());
  CorpusData data;
  data.manifest = read_manifest(dir / "manifest.txt");
  data.build_index();

  auto load_aligned = [&](const fs::path& path) {
    auto records = io::read_archive(path);
    std::vector<Matrix> out(data.manifest.size());
    std::vector<char> seen(data.manifest.size(), 0);
    for (auto& r : records) {
      const auto i = data.index_of(r.id);
      out[i] = std::move(r.data);
      seen[i] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw DataError(path.string() + ": no record for " + data.manifest[i].utt_id);
    }
    return out;
  };

  auto feats = load_aligned(dir / "feats.dvf");
  for (std::size_t i = 0; i < feats.size(); ++i) {
    FeatureSequence fs;
    fs.frames = std::move(feats[i]);
    fs.utt_id = data.manifest[i].utt_id;
    fs.speaker_id = data.manifest[i].speaker_id;
    fs.phrase_id = data.manifest[i].phrase_id;
    data.feats.push_back(std::move(fs));
  }
  if (fs::exists(dir / "labels.dvf")) {
    for (const auto& m : load_aligned(dir / "labels.dvf")) {
      std::vector<int> lab(static_cast<std::size_t>(m.rows()));
      for (Eigen::Index t = 0; t < m.rows(); ++t) lab[static_cast<std::size_t>(t)] = static_cast<int>(std::lround(m(t, 0)));
      data.labels.push_back(std::move(lab));
    }
  }
  if (fs::exists(dir / "posteriors.dvf")) data.posteriors = load_aligned(dir / "posteriors.dvf");

  data.train_ids = read_list(dir / "train.list");
  data.cv_ids = read_list(dir / "cv.list");
  data.eval_ids = read_list(dir / "eval.list");
  {
    auto is = open_in(dir / "enroll.map");
    std::string line;
    while (std::getline(is, line)) {
      std::istringstream ss(line);
      std::string model, utt;
      if (!(ss >> model)) continue;
      auto& utts = data.enroll_map[model];
      while (ss >> utt) {
        data.index_of(utt);
        utts.push_back(utt);
      }
      if (utts.empty()) throw ParseError("enroll.map: model " + model + " has no utterances");
    }
  }
  data.trials = eval::load_trials(dir / "trials.txt");
  return data;
}

Matrix network_inputs(const nnet::NetworkSpec& spec, const FeatureSequence& feats, const Matrix* posteriors,
                      int context_left, int context_right) {
  const auto stacked = frontend::stack_context(feats, context_left, context_right);
  return nnet::assemble_inputs(spec, stacked.frames, spec.phone_dependent() ? posteriors : nullptr);
}

nnet::NetworkSpec network_spec_for(const RunConfig& cfg, const CorpusData& data, bool phone_dependent) {
  if (data.feats.empty()) throw DataError("corpus has no utterances");
  std::set<std::string> speakers;
  for (const auto& id : data.train_ids) speakers.insert(data.manifest[data.index_of(id)].speaker_id);
  if (speakers.empty()) throw InputError("corpus has no training utterances");
  if (phone_dependent && data.posteriors.empty()) {
    throw DataError("phone-dependent training needs posteriors.dvf in the corpus");
  }
  nnet::NetworkSpec spec;
  spec.posterior_dim = phone_dependent ? data.posterior_dim() : 0;
  spec.input_dim = static_cast<int>(data.feats.front().dim()) * (cfg.context_left + 1 + cfg.context_right) +
                   spec.posterior_dim;
  spec.hidden_dims = cfg.hidden_dims;
  spec.output_dim = static_cast<int>(speakers.size());
  spec.seed = derive_seed(cfg.seed, 3);
  return spec;
}

TrainingData build_training_data(const RunConfig& cfg, const CorpusData& data, const nnet::NetworkSpec& spec) {
  TrainingData out;
  std::set<std::string> speaker_set;
  for (const auto& id : data.train_ids) speaker_set.insert(data.manifest[data.index_of(id)].speaker_id);
  out.speakers.assign(speaker_set.begin(), speaker_set.end());
  std::unordered_map<std::string, int> label_of;
  for (std::size_t i = 0; i < out.speakers.size(); ++i) label_of[out.speakers[i]] = static_cast<int>(i);

  auto build = [&](const std::vector<std::string>& ids) {
    std::vector<Matrix> parts;
    std::vector<int> labels;
    Eigen::Index total = 0;
    for (const auto& id : ids) {
      const auto i = data.index_of(id);
      const auto it = label_of.find(data.manifest[i].speaker_id);
      if (it == label_of.end()) {
        throw DataError("utterance " + id + " belongs to speaker " + data.manifest[i].speaker_id +
                        " who has no training data");
      }
      const Matrix* post = spec.phone_dependent() ? &data.posteriors.at(i) : nullptr;
      parts.push_back(network_inputs(spec, data.feats[i], post, cfg.context_left, cfg.context_right));
      labels.insert(labels.end(), static_cast<std::size_t>(parts.back().rows()), it->second);
      total += parts.back().rows();
    }
    nnet::Dataset ds;
    ds.inputs.resize(spec.input_dim, total);
    Eigen::Index col = 0;
    for (const auto& p : parts) {
      ds.inputs.middleCols(col, p.rows()) = p.transpose();
      col += p.rows();
    }
    ds.labels = std::move(labels);
    return ds;
  };
  out.train = build(data.train_ids);
  out.cv = build(data.cv_ids);
  return out;
}

nnet::TrainResult train_on_corpus(const RunConfig& cfg, const CorpusData& data, bool phone_dependent) {
  const auto spec = network_spec_for(cfg, data, phone_dependent);
  const auto td = build_training_data(cfg, data, spec);
  auto tc = cfg.train;
  tc.shuffle_seed = derive_seed(cfg.seed, 4);
  return nnet::train(nnet::init_network(spec), td.train, td.cv, tc);
}

ScoringMethod ScoringMethod::parse(const std::string& token) {
  if (token == "avg") return {Method::Average, 1};
  if (token == "dtw") return {Method::Dtw, 1};
  if (token.rfind("seg:", 0) == 0) {
    int n = 0;
    const std::string rest = token.substr(4);
    std::size_t used = 0;
    try {
      n = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != rest.size() || rest.empty() || n < 1) throw ConfigError("bad segment count in method '" + token + "'");
    return {Method::Segment, n};
  }
  throw ConfigError("unknown scoring method '" + token + "' (expected avg, seg:<n> or dtw)");
}

std::string ScoringMethod::str() const {
  switch (method) {
    case Method::Average: return "avg";
    case Method::Segment: return "seg:" + std::to_string(segments);
    case Method::Dtw: return "dtw";
  }
  return "?";
}

std::unordered_map<std::string, Matrix> extract_features(const RunConfig& cfg, const nnet::Network& net,
                                                          const CorpusData& data,
                                                          const std::vector<std::string>& utt_ids) {
  std::vector<Matrix> results(utt_ids.size());
  parallel_for(utt_ids.size(), cfg.jobs, [&](std::size_t k) {
    const auto i = data.index_of(utt_ids[k]);
    const Matrix* post = nullptr;
    if (net.spec.phone_dependent()) {
      if (data.posteriors.empty()) throw DataError("phone-dependent model needs posteriors.dvf");
      post = &data.posteriors[i];
    }
    results[k] = nnet::extract_frame_features(
        net, network_inputs(net.spec, data.feats[i], post, cfg.context_left, cfg.context_right));
  });
  std::unordered_map<std::string, Matrix> out;
  for (std::size_t k = 0; k < utt_ids.size(); ++k) out.emplace(utt_ids[k], std::move(results[k]));
  return out;
}

std::vector<eval::ScoreRecord> score_trials(const RunConfig& cfg, const nnet::Network& net, const CorpusData& data,
                                            const eval::TrialList& trials, const ScoringMethod& method) {
  auto enroll_utts = [&](const std::string& id) -> std::vector<std::string> {
    if (const auto it = data.enroll_map.find(id); it != data.enroll_map.end()) return it->second;
    if (data.has_utterance(id)) return {id};
    throw DataError("enrollment id '" + id + "' is neither a model nor an utterance");
  };

  std::set<std::string> needed;
  std::set<std::string> models;
  for (const auto& t : trials) {
    if (!data.has_utterance(t.test_id)) throw DataError("unknown test id '" + t.test_id + "'");
    needed.insert(t.test_id);
    models.insert(t.enroll_id);
    for (auto& u : enroll_utts(t.enroll_id)) needed.insert(u);
  }
  const std::vector<std::string> ids(needed.begin(), needed.end());
  const auto frames = extract_features(cfg, net, data, ids);
  auto seq_of = [&](const std::string& id) {
    FeatureSequence fs;
    fs.frames = frames.at(id);
    fs.utt_id = id;
    return fs;
  };

  // Per-utterance and per-model pooled representations.
  std::unordered_map<std::string, embedding::DVector> avg;
  std::unordered_map<std::string, embedding::DVectorSequence> seg;
  if (method.method == Method::Average) {
    for (const auto& id : ids) avg.emplace(id, embedding::average_pool(seq_of(id), cfg.unit_norm));
  } else if (method.method == Method::Segment) {
    for (const auto& id : ids) seg.emplace(id, embedding::segment_pool(seq_of(id), method.segments, cfg.unit_norm));
  }
  std::unordered_map<std::string, embedding::DVector> model_avg;
  std::unordered_map<std::string, embedding::DVectorSequence> model_seg;
  for (const auto& m : models) {
    const auto utts = enroll_utts(m);
    if (method.method == Method::Average) {
      std::vector<embedding::DVector> vs;
      for (const auto& u : utts) vs.push_back(avg.at(u));
      model_avg.emplace(m, embedding::mean_of(vs, m));
    } else if (method.method == Method::Segment) {
      std::vector<embedding::DVectorSequence> ss;
      for (const auto& u : utts) ss.push_back(seg.at(u));
      model_seg.emplace(m, embedding::mean_of(ss, m));
    }
  }

  std::vector<eval::ScoreRecord> out(trials.size());
  parallel_for(trials.size(), cfg.jobs, [&](std::size_t k) {
    const auto& t = trials[k];
    double s = 0.0;
    switch (method.method) {
      case Method::Average:
        s = scoring::cosine(model_avg.at(t.enroll_id).values, avg.at(t.test_id).values);
        break;
      case Method::Segment:
        s = scoring::segment_score(model_seg.at(t.enroll_id), seg.at(t.test_id));
        break;
      case Method::Dtw: {
        const auto utts = enroll_utts(t.enroll_id);
        double sum = 0.0;
        for (const auto& u : utts) sum += scoring::dtw_score(frames.at(u), frames.at(t.test_id), cfg.dtw);
        s = sum / static_cast<double>(utts.size());
        break;
      }
    }
    if (!std::isfinite(s)) throw NumericError("non-finite score for trial " + t.enroll_id + " " + t.test_id);
    out[k] = {t, s};
  });
  return out;
}

std::vector<EerRow> eer_report(const std::vector<eval::ScoreRecord>& records, const std::string& system,
                               const std::unordered_map<std::string, std::string>& phrase_of_test) {
  std::vector<EerRow> rows;
  if (!phrase_of_test.empty()) {
    std::map<std::string, std::vector<eval::ScoreRecord>> by_phrase;
    for (const auto& r : records) {
      const auto it = phrase_of_test.find(r.trial.test_id);
      if (it == phrase_of_test.end()) throw DataError("no phrase for test id '" + r.trial.test_id + "'");
      by_phrase[it->second].push_back(r);
    }
    if (by_phrase.size() > 1) {
      for (const auto& [phrase, recs] : by_phrase) {
        const auto res = eval::compute_eer(recs);
        rows.push_back({phrase, system, 100.0 * res.eer, res.threshold});
      }
    }
  }
  const auto res = eval::compute_eer(records);
  rows.push_back({"all", system, 100.0 * res.eer, res.threshold});
  return rows;
}

void write_eer_table(std::ostream& os, const std::vector<EerRow>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %-24s %8s %12s\n", "phrase", "system", "EER", "threshold");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %-24s %7.2f%% %12.6f\n", r.phrase.c_str(), r.system.c_str(),
                  r.eer_percent, r.threshold);
    os << buf;
  }
}

void write_eer_csv(std::ostream& os, const std::vector<EerRow>& rows) {
  os << "phrase,system,eer_percent,threshold\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g\n", r.eer_percent, r.threshold);
    os << r.phrase << ',' << r.system << buf;
  }
}

std::vector<EerRow> read_eer_csv(std::istream& is) {
  std::vector<EerRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    EerRow r;
    std::string eer, thr;
    if (!std::getline(ss, r.phrase, ',') || !std::getline(ss, r.system, ',') || !std::getline(ss, eer, ',') ||
        !std::getline(ss, thr, ',')) {
      throw ParseError("bad EER csv line: " + line);
    }
    r.eer_percent = std::stod(eer);
    r.threshold = std::stod(thr);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<eval::ScoreRecord> join_scores(const std::vector<scoring::ScoreLine>& scores,
                                           const eval::TrialList& trials, const std::string& score_name,
                                           const std::string& trial_name) {
  if (scores.size() != trials.size()) {
    throw DataError("score file " + score_name + " has " + std::to_string(scores.size()) +
                    " lines but trial file " + trial_name + " has " + std::to_string(trials.size()));
  }
  std::vector<eval::ScoreRecord> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].enroll_id != trials[i].enroll_id || scores[i].test_id != trials[i].test_id) {
      throw DataError("line " + std::to_string(i + 1) + " of " + score_name + " (" + scores[i].enroll_id + " " +
                      scores[i].test_id + ") does not match " + trial_name);
    }
    out.push_back({trials[i], scores[i].score});
  }
  return out;
}

}  // namespace dvector::cli
