#include "dvector/commands.hpp"

#include "dvector/archive.hpp"
#include "dvector/errors.hpp"
#include "dvector/frontend.hpp"
#include "dvector/pipeline.hpp"
#include "dvector/scoring.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dvector::cli {
namespace {

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw PathError(std::string(what) + " not found: " + p.string());
}

void require_parent(const fs::path& p) {
  const auto parent = fs::absolute(p).parent_path();
  if (!fs::is_directory(parent)) throw PathError("output directory does not exist: " + parent.string());
}

std::vector<scoring::ScoreLine> load_scores(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw PathError("cannot open score file: " + p.string());
  return scoring::read_scores(is, p.string());
}

void save_scores(const fs::path& p, const std::vector<scoring::ScoreLine>& lines) {
  std::ofstream os(p);
  if (!os) throw PathError("cannot open for writing: " + p.string());
  scoring::write_scores(os, lines);
}

std::vector<scoring::ScoreLine> to_lines(const std::vector<eval::ScoreRecord>& records) {
  std::vector<scoring::ScoreLine> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back({r.trial.enroll_id, r.trial.test_id, r.score});
  return lines;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  const auto abs = fs::absolute(out_dir);
  if (!fs::is_directory(abs.parent_path())) {
    throw PathError("parent of output directory does not exist: " + abs.parent_path().string());
  }
  RunConfig c = cfg;
  c.derive_seeds();
  const auto corpus = synth::generate(c.synth);
  const auto proto = synth::split_protocol(corpus, c.protocol);
  const auto data = corpus_from_synth(corpus, proto, c.posterior_smoothing);
  fs::create_directories(abs);
  write_corpus(abs, data);
  std::ofstream os(abs / "config.txt");
  os << c.dump();
}

nnet::TrainResult cmd_train(const RunConfig& cfg, const fs::path& corpus_dir, const fs::path& model_out,
                            bool phone_posteriors, const fs::path& log_out) {
  require_parent(model_out);
  require_parent(log_out);
  const auto data = read_corpus(corpus_dir);
  auto result = train_on_corpus(cfg, data, phone_posteriors);
  nnet::save_model(model_out, result.net);
  std::ofstream log(log_out);
  if (!log) throw PathError("cannot open for writing: " + log_out.string());
  nnet::write_train_log(log, result.log);
  return result;
}

void cmd_score(const RunConfig& cfg, const fs::path& model, const fs::path& corpus_dir, const fs::path& trials,
               const std::string& method, const fs::path& score_out) {
  const auto m = ScoringMethod::parse(method);
  require_file(model, "model");
  require_file(trials, "trial list");
  require_parent(score_out);
  const auto net = nnet::load_model(model);
  const auto data = read_corpus(corpus_dir);
  const auto trial_list = eval::load_trials(trials);
  const auto records = score_trials(cfg, net, data, trial_list, m);
  save_scores(score_out, to_lines(records));
}

void cmd_eval(const fs::path& score_file, const fs::path& trials, const std::optional<fs::path>& manifest,
              const std::string& system, std::ostream& report, const std::optional<fs::path>& csv_out) {
  require_file(score_file, "score file");
  require_file(trials, "trial list");
  if (csv_out) require_parent(*csv_out);
  const auto records = join_scores(load_scores(score_file), eval::load_trials(trials), score_file.string(),
                                   trials.string());
  std::unordered_map<std::string, std::string> phrase_of;
  if (manifest) {
    for (const auto& e : read_manifest(*manifest)) phrase_of[e.utt_id] = e.phrase_id;
  }
  const auto rows = eer_report(records, system, phrase_of);
  write_eer_table(report, rows);
  if (csv_out) {
    std::ofstream os(*csv_out);
    if (!os) throw PathError("cannot open for writing: " + csv_out->string());
    write_eer_csv(os, rows);
  }
}

eval::SweepResult cmd_fuse(const fs::path& score_a, const fs::path& score_b, const fs::path& trials,
                           const FuseOptions& opts, const fs::path& score_out, std::ostream& report) {
  if (opts.alpha.has_value() == opts.sweep) throw ConfigError("fuse: give exactly one of --alpha or --sweep");
  if (opts.alpha) scoring::FusionConfig{*opts.alpha}.validate();
  require_file(score_a, "score file");
  require_file(score_b, "score file");
  require_file(trials, "trial list");
  require_parent(score_out);

  const auto trial_list = eval::load_trials(trials);
  auto a = join_scores(load_scores(score_a), trial_list, score_a.string(), trials.string());
  auto b = join_scores(load_scores(score_b), trial_list, score_b.string(), trials.string());
  if (opts.minmax) {
    auto normalize = [](std::vector<eval::ScoreRecord>& recs) {
      std::vector<double> s;
      for (const auto& r : recs) s.push_back(r.score);
      s = scoring::min_max_normalize(s);
      for (std::size_t i = 0; i < recs.size(); ++i) recs[i].score = s[i];
    };
    normalize(a);
    normalize(b);
  }

  eval::SweepResult sweep;
  char buf[128];
  if (opts.sweep) {
    sweep = eval::sweep_alpha(a, b, opts.grid_step);
    report << "alpha    EER%\n";
    for (const auto& row : sweep.table) {
      std::snprintf(buf, sizeof(buf), "%5.3f %7.2f%s\n", row.alpha, 100.0 * row.eer,
                    row.alpha == sweep.best_alpha ? " *" : "");
      report << buf;
    }
  } else {
    sweep.best_alpha = *opts.alpha;
  }

  const scoring::FusionConfig fc{sweep.best_alpha};
  std::vector<eval::ScoreRecord> fused = a;
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i].score = scoring::fuse(a[i].score, b[i].score, fc);
  const auto res = eval::compute_eer(fused);
  sweep.best_eer = res.eer;
  std::snprintf(buf, sizeof(buf), "fused alpha=%.3f EER=%.2f%% (A %.2f%%, B %.2f%%)\n", sweep.best_alpha,
                100.0 * res.eer, 100.0 * eval::compute_eer(a).eer, 100.0 * eval::compute_eer(b).eer);
  report << buf;
  save_scores(score_out, to_lines(fused));
  return sweep;
}

void cmd_fbank(const RunConfig& cfg, const fs::path& wav_list, const fs::path& out) {
  require_file(wav_list, "wav list");
  require_parent(out);
  std::ifstream is(wav_list);
  std::vector<io::ArchiveRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string id, path;
    if (!(ss >> id)) continue;
    if (!(ss >> path)) throw ParseError(wav_list.string() + ": line " + std::to_string(line_no) + ": missing path");
    const auto signal = frontend::read_wav(path);
    records.push_back({id, frontend::fbank(signal, cfg.frontend).frames});
  }
  io::write_archive(out, records);
}

void cmd_extract(const RunConfig& cfg, const fs::path& model, const fs::path& corpus_dir, const std::string& pool,
                 const fs::path& out, bool all_utts) {
  std::optional<ScoringMethod> method;
  if (pool != "frames") {
    method = ScoringMethod::parse(pool);
    if (method->method == Method::Dtw) throw ConfigError("extract: pool must be frames, avg or seg:<n>");
  }
  require_file(model, "model");
  require_parent(out);
  const auto net = nnet::load_model(model);
  const auto data = read_corpus(corpus_dir);
  std::vector<std::string> ids;
  if (all_utts) {
    for (const auto& m : data.manifest) ids.push_back(m.utt_id);
  } else {
    ids = data.eval_ids;
  }
  const auto feats = extract_features(cfg, net, data, ids);
  std::vector<io::ArchiveRecord> records;
  for (const auto& id : ids) {
    FeatureSequence fs;
    fs.frames = feats.at(id);
    fs.utt_id = id;
    Matrix m;
    if (!method) {
      m = fs.frames;
    } else if (method->method == Method::Average) {
      m = embedding::average_pool(fs, cfg.unit_norm).values.transpose();
    } else {
      m = embedding::segment_pool(fs, method->segments, cfg.unit_norm).as_matrix();
    }
    records.push_back({id, std::move(m)});
  }
  io::write_archive(out, records);
}

}  // namespace dvector::cli
