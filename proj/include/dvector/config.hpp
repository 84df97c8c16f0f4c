#pragma once

#include "dvector/frontend.hpp"
#include "dvector/network.hpp"
#include "dvector/scoring.hpp"
#include "dvector/synthdata.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dvector::cli {

/// Everything a run needs, loadable from `section.key = value` lines.
/// `#` starts a comment. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;

  frontend::FrontendConfig frontend;
  int context_left = 10;
  int context_right = 10;

  std::vector<int> hidden_dims = {200, 200, 200, 200};
  nnet::TrainConfig train;

  synth::SynthConfig synth;
  double posterior_smoothing = 0.1;
  synth::ProtocolConfig protocol;

  scoring::DtwConfig dtw;
  bool unit_norm = false;
  int jobs = 1;

  double grid_step = 0.05;
  bool fusion_minmax = false;

  /// Sets one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Parses "section.key=value".
  void apply_override(const std::string& assignment);
  void parse(std::istream& is, const std::string& source_name);
  static RunConfig load(const std::filesystem::path& path);

  /// Propagates run.seed into the per-module seeds.
  void derive_seeds();
  void validate() const;

  /// Every key with its current value, in `section.key = value` form.
  std::string dump() const;
  static std::vector<std::string> known_keys();
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dvector::cli
