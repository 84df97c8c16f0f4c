// dvec: synthetic-corpus generation, d-vector network training, trial
// scoring (avg / seg:n / dtw), EER evaluation and score fusion.
//
// Exit codes: 0 success, 1 usage/config error, 2 data/format error,
// 3 numeric failure.

#include "dvector/commands.hpp"
#include "dvector/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

namespace cli = dvector::cli;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;
};

cli::RunConfig resolve_config(const GlobalOptions& g) {
  cli::RunConfig cfg;
  if (!g.config_path.empty()) cfg = cli::RunConfig::load(g.config_path);
  for (const auto& o : g.overrides) cfg.apply_override(o);
  if (g.jobs > 0) cfg.jobs = g.jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"d-vector text-dependent speaker verification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "config file of 'section.key = value' lines");
  app.add_option("--set", g.overrides, "override a config key, e.g. --set train.max_epochs=5");
  app.add_option("--jobs", g.jobs, "threads for independent trial scoring");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus and trial protocol");
  fs::path gen_out;
  gen->add_option("out_dir", gen_out, "output corpus directory")->required();

  auto* train = app.add_subcommand("train", "train the speaker network");
  fs::path train_corpus, model_out, log_out;
  bool phone_posteriors = false;
  train->add_option("corpus_dir", train_corpus)->required();
  train->add_option("model_out", model_out)->required();
  train->add_flag("--phone-posteriors", phone_posteriors, "append phone posteriors to the input");
  train->add_option("--log", log_out, "training log CSV (default <model_out>.log.csv)");

  auto* score = app.add_subcommand("score", "score a trial list");
  fs::path score_model, score_corpus, score_trials, score_out;
  std::string method = "avg";
  score->add_option("model", score_model)->required();
  score->add_option("corpus_dir", score_corpus)->required();
  score->add_option("score_out", score_out)->required();
  score->add_option("--trials", score_trials, "trial list (default <corpus_dir>/trials.txt)");
  score->add_option("-m,--method", method, "avg, seg:<n> or dtw");

  auto* evalc = app.add_subcommand("eval", "compute EER for a score file");
  fs::path eval_scores, eval_trials, eval_manifest, eval_csv;
  std::string system_name;
  evalc->add_option("score_file", eval_scores)->required();
  evalc->add_option("trials", eval_trials)->required();
  evalc->add_option("--manifest", eval_manifest, "corpus manifest for per-phrase rows");
  evalc->add_option("--csv", eval_csv, "write the report as CSV");
  evalc->add_option("--name", system_name, "system name in the report (default: score file stem)");

  auto* fuse = app.add_subcommand("fuse", "interpolate two systems' scores");
  fs::path fuse_a, fuse_b, fuse_trials, fuse_out;
  double alpha = 0.0;
  cli::FuseOptions fuse_opts;
  fuse->add_option("score_a", fuse_a)->required();
  fuse->add_option("score_b", fuse_b)->required();
  fuse->add_option("trials", fuse_trials)->required();
  fuse->add_option("score_out", fuse_out)->required();
  auto* alpha_opt = fuse->add_option("--alpha", alpha, "weight of system A");
  auto* sweep_opt = fuse->add_flag("--sweep", fuse_opts.sweep, "search alpha on a grid");
  alpha_opt->excludes(sweep_opt);
  fuse->add_flag("--minmax", fuse_opts.minmax, "min-max normalize each system first");

  auto* fb = app.add_subcommand("fbank", "log mel filterbank archive from WAV files");
  fs::path wav_list, fbank_out;
  fb->add_option("wav_list", wav_list, "lines of '<utt-id> <wav-path>'")->required();
  fb->add_option("out", fbank_out)->required();

  auto* extract = app.add_subcommand("extract", "write network features or d-vectors");
  fs::path ex_model, ex_corpus, ex_out;
  std::string pool = "avg";
  bool all_utts = false;
  extract->add_option("model", ex_model)->required();
  extract->add_option("corpus_dir", ex_corpus)->required();
  extract->add_option("out", ex_out)->required();
  extract->add_option("--pool", pool, "frames, avg or seg:<n>");
  extract->add_flag("--all", all_utts, "all utterances instead of the eval list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve_config(g);
    if (*gen) {
      cli::cmd_gen_data(cfg, gen_out);
    } else if (*train) {
      if (log_out.empty()) log_out = fs::path(model_out.string() + ".log.csv");
      const auto res = cli::cmd_train(cfg, train_corpus, model_out, phone_posteriors, log_out);
      const auto& last = res.log.back();
      std::fprintf(stderr, "trained %zu epochs, best CV loss %.5f (final lr %.6g, CV acc %.3f)\n", res.log.size(),
                   res.best_cv_loss, last.lr, last.cv_accuracy);
    } else if (*score) {
      if (score_trials.empty()) score_trials = score_corpus / "trials.txt";
      cli::cmd_score(cfg, score_model, score_corpus, score_trials, method, score_out);
    } else if (*evalc) {
      if (system_name.empty()) system_name = eval_scores.stem().string();
      cli::cmd_eval(eval_scores, eval_trials,
                    eval_manifest.empty() ? std::nullopt : std::optional<fs::path>(eval_manifest), system_name,
                    std::cout, eval_csv.empty() ? std::nullopt : std::optional<fs::path>(eval_csv));
    } else if (*fuse) {
      if (alpha_opt->count() > 0) fuse_opts.alpha = alpha;
      fuse_opts.grid_step = cfg.grid_step;
      fuse_opts.minmax = fuse_opts.minmax || cfg.fusion_minmax;
      cli::cmd_fuse(fuse_a, fuse_b, fuse_trials, fuse_opts, fuse_out, std::cout);
    } else if (*fb) {
      cli::cmd_fbank(cfg, wav_list, fbank_out);
    } else if (*extract) {
      cli::cmd_extract(cfg, ex_model, ex_corpus, pool, ex_out, all_utts);
    }
  } catch (const dvector::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dvector::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const dvector::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
