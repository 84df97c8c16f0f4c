#pragma once

// Subcommand bodies behind the `dvec` binary. Each one expects an already
// validated RunConfig and checks its own inputs before writing anything.

#include "dvector/config.hpp"
#include "dvector/evaluation.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace dvector::cli {

namespace fs = std::filesystem;

/// Synthetic corpus + protocol into out_dir (created if its parent exists).
void cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir);

/// Trains on corpus_dir's train/cv lists; writes the model and a CSV log.
nnet::TrainResult cmd_train(const RunConfig& cfg, const fs::path& corpus_dir, const fs::path& model_out,
                            bool phone_posteriors, const fs::path& log_out);

/// Scores a trial list ("avg", "seg:<n>" or "dtw") into a score file.
void cmd_score(const RunConfig& cfg, const fs::path& model, const fs::path& corpus_dir,
               const fs::path& trials, const std::string& method, const fs::path& score_out);

/// Per-phrase EER table on `report`; CSV when csv_out is set. Phrases come
/// from the manifest when given.
void cmd_eval(const fs::path& score_file, const fs::path& trials, const std::optional<fs::path>& manifest,
              const std::string& system, std::ostream& report, const std::optional<fs::path>& csv_out);

struct FuseOptions {
  std::optional<double> alpha;  // fixed-alpha fusion
  bool sweep = false;
  double grid_step = 0.05;
  bool minmax = false;
};

/// Writes fused scores (fixed alpha, or the best alpha of the sweep) and a
/// report; the sweep table marks the best row with '*'.
eval::SweepResult cmd_fuse(const fs::path& score_a, const fs::path& score_b, const fs::path& trials,
                           const FuseOptions& opts, const fs::path& score_out, std::ostream& report);

/// Log mel filterbank archive from `<utt-id> <wav-path>` lines.
void cmd_fbank(const RunConfig& cfg, const fs::path& wav_list, const fs::path& out);

/// Network features for the corpus's eval utterances (or all when
/// all_utts): "frames" writes T x H, "avg" 1 x H, "seg:<n>" n x H.
void cmd_extract(const RunConfig& cfg, const fs::path& model, const fs::path& corpus_dir, const std::string& pool,
                 const fs::path& out, bool all_utts);

}  // namespace dvector::cli
