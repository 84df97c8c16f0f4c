#include "dvector/config.hpp"

#include "dvector/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

namespace dvector::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad boolean '" + value + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Entry number_entry(const char* key, T RunConfig::*member) {
  return {key, [key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

// For fields nested one level down (e.g. frontend.n_mel).
template <typename S, typename T>
Entry nested_entry(const char* key, S RunConfig::*section, T S::*member) {
  return {key,
          [key, section, member](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) (c.*section).*member = parse_bool(key, v);
            else (c.*section).*member = parse_number<T>(key, v);
          },
          [section, member](const RunConfig& c) -> std::string {
            const T& v = (c.*section).*member;
            if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
            else if constexpr (std::is_floating_point_v<T>) return format_double(v);
            else return std::to_string(v);
          }};
}

Entry bool_entry(const char* key, bool RunConfig::*member) {
  return {key, [key, member](RunConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [member](const RunConfig& c) -> std::string { return c.*member ? "true" : "false"; }};
}

const std::vector<Entry>& registry() {
  using R = RunConfig;
  static const std::vector<Entry> entries = {
      number_entry("run.seed", &R::seed),
      number_entry("run.jobs", &R::jobs),

      nested_entry("frontend.n_mel", &R::frontend, &frontend::FrontendConfig::n_mel),
      nested_entry("frontend.frame_len", &R::frontend, &frontend::FrontendConfig::frame_len),
      nested_entry("frontend.frame_shift", &R::frontend, &frontend::FrontendConfig::frame_shift),
      nested_entry("frontend.preemph", &R::frontend, &frontend::FrontendConfig::preemph),
      nested_entry("frontend.fft_size", &R::frontend, &frontend::FrontendConfig::fft_size),
      nested_entry("frontend.mel_low", &R::frontend, &frontend::FrontendConfig::mel_low),
      nested_entry("frontend.mel_high", &R::frontend, &frontend::FrontendConfig::mel_high),
      nested_entry("frontend.mean_normalize", &R::frontend, &frontend::FrontendConfig::mean_normalize),
      number_entry("frontend.context_left", &R::context_left),
      number_entry("frontend.context_right", &R::context_right),

      {"network.hidden_dims",
       [](R& c, const std::string& v) { c.hidden_dims = parse_int_list("network.hidden_dims", v); },
       [](const R& c) {
         std::string s;
         for (std::size_t i = 0; i < c.hidden_dims.size(); ++i) {
           if (i) s += ",";
           s += std::to_string(c.hidden_dims[i]);
         }
         return s;
       }},

      nested_entry("train.init_lr", &R::train, &nnet::TrainConfig::init_lr),
      nested_entry("train.lr_halving_threshold", &R::train, &nnet::TrainConfig::lr_halving_threshold),
      nested_entry("train.stop_lr", &R::train, &nnet::TrainConfig::stop_lr),
      nested_entry("train.stop_improvement", &R::train, &nnet::TrainConfig::stop_improvement),
      nested_entry("train.max_epochs", &R::train, &nnet::TrainConfig::max_epochs),
      nested_entry("train.minibatch", &R::train, &nnet::TrainConfig::minibatch),
      nested_entry("train.momentum", &R::train, &nnet::TrainConfig::momentum),
      nested_entry("train.lr_per_frame", &R::train, &nnet::TrainConfig::lr_per_frame),

      nested_entry("synth.n_speakers", &R::synth, &synth::SynthConfig::n_speakers),
      nested_entry("synth.n_phrases", &R::synth, &synth::SynthConfig::n_phrases),
      nested_entry("synth.phones_per_phrase", &R::synth, &synth::SynthConfig::phones_per_phrase),
      nested_entry("synth.utterances_per_speaker_phrase", &R::synth,
                   &synth::SynthConfig::utterances_per_speaker_phrase),
      nested_entry("synth.feature_dim", &R::synth, &synth::SynthConfig::feature_dim),
      nested_entry("synth.phone_set_size", &R::synth, &synth::SynthConfig::phone_set_size),
      nested_entry("synth.frames_per_phone", &R::synth, &synth::SynthConfig::frames_per_phone),
      nested_entry("synth.frames_jitter", &R::synth, &synth::SynthConfig::frames_jitter),
      nested_entry("synth.speaker_scale", &R::synth, &synth::SynthConfig::speaker_scale),
      nested_entry("synth.phone_scale", &R::synth, &synth::SynthConfig::phone_scale),
      nested_entry("synth.session_scale", &R::synth, &synth::SynthConfig::session_scale),
      nested_entry("synth.noise_scale", &R::synth, &synth::SynthConfig::noise_scale),
      number_entry("synth.posterior_smoothing", &R::posterior_smoothing),

      nested_entry("protocol.train_fraction", &R::protocol, &synth::ProtocolConfig::train_fraction),
      nested_entry("protocol.cv_fraction", &R::protocol, &synth::ProtocolConfig::cv_fraction),
      nested_entry("protocol.enroll_per_model", &R::protocol, &synth::ProtocolConfig::enroll_per_model),

      nested_entry("scoring.dtw_band", &R::dtw, &scoring::DtwConfig::band),
      bool_entry("scoring.unit_norm", &R::unit_norm),

      number_entry("eval.grid_step", &R::grid_step),
      bool_entry("eval.fusion_minmax", &R::fusion_minmax),
  };
  return entries;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& e : registry()) {
    if (key == e.key) {
      e.set(*this, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::parse(std::istream& is, const std::string& source_name) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'section.key = value'");
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  RunConfig cfg;
  cfg.parse(is, path.string());
  return cfg;
}

void RunConfig::derive_seeds() {
  synth.seed = derive_seed(seed, 1);
  protocol.seed = derive_seed(seed, 2);
  train.shuffle_seed = derive_seed(seed, 4);
}

void RunConfig::validate() const {
  // Front-end rates are checked against each WAV's rate at use; 16 kHz here.
  frontend.validate(16000);
  if (context_left < 0 || context_right < 0) throw ConfigError("frontend context sizes must be >= 0");
  if (hidden_dims.empty()) throw ConfigError("network.hidden_dims must not be empty");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("network.hidden_dims entries must be >= 1");
  train.validate();
  synth.validate();
  if (!(posterior_smoothing >= 0 && posterior_smoothing < 1)) {
    throw ConfigError("synth.posterior_smoothing must be in [0, 1)");
  }
  protocol.validate();
  if (dtw.band < 0) throw ConfigError("scoring.dtw_band must be >= 0");
  if (jobs < 1) throw ConfigError("run.jobs must be >= 1");
  if (!(grid_step > 0 && grid_step <= 0.5)) throw ConfigError("eval.grid_step must be in (0, 0.5]");
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& e : registry()) out += std::string(e.key) + " = " + e.get(*this) + "\n";
  return out;
}

std::vector<std::string> RunConfig::known_keys() {
  std::vector<std::string> keys;
  for (const auto& e : registry()) keys.emplace_back(e.key);
  return keys;
}

}  // namespace dvector::cli
