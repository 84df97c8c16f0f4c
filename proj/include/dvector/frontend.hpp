#pragma once

#include "dvector/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace dvector::frontend {

struct AudioSignal {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;
};

struct FrontendConfig {
  int n_mel = 40;
  double frame_len = 0.025;    // seconds
  double frame_shift = 0.010;  // seconds
  double preemph = 0.97;
  int fft_size = 512;          // 0 selects the next power of two >= frame length
  double mel_low = 20.0;       // Hz
  double mel_high = 0.0;       // Hz; <= 0 means offset from Nyquist
  bool mean_normalize = false; // per-utterance mean subtraction

  /// Throws ConfigError unless the config is consistent for this rate.
  void validate(int sample_rate) const;
  int frame_length_samples(int sample_rate) const;
  int frame_shift_samples(int sample_rate) const;
  int resolved_fft_size(int sample_rate) const;
  double resolved_mel_high(int sample_rate) const;
};

/// Reads a 16-bit PCM mono RIFF/WAVE file.
AudioSignal read_wav(const std::filesystem::path& path);
/// Writes 16-bit PCM mono; samples are clipped to [-1, 1).
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

/// y[n] = x[n] - coeff * x[n-1], with y[0] = x[0] - coeff * x[0].
AudioSignal pre_emphasize(const AudioSignal& signal, double coeff);
void pre_emphasize_inplace(std::span<double> frame, double coeff);

std::vector<double> hamming_window(int length);

/// Drop-tail framing: floor((N - L) / S) + 1 frames, each multiplied by a
/// Hamming window. Throws TooShortError when N < L.
std::vector<std::vector<double>> frame_signal(const AudioSignal& signal,
                                              const FrontendConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters over FFT bins 0..fft_size/2, equally spaced on the
/// mel scale between mel_low and mel_high.
class MelBanks {
 public:
  MelBanks(const FrontendConfig& cfg, int sample_rate);

  int num_bins() const { return static_cast<int>(center_hz_.size()); }
  double center_hz(int bin) const { return center_hz_[bin]; }
  /// power_spectrum has fft_size/2 + 1 entries.
  void compute(std::span<const double> power_spectrum, std::span<double> out) const;

 private:
  struct Filter {
    int first_fft_bin = 0;
    std::vector<double> weights;
  };
  std::vector<Filter> filters_;
  std::vector<double> center_hz_;
};

inline constexpr double kLogFloor = 1e-10;

/// Log mel filterbank energies: per frame pre-emphasis, Hamming window,
/// FFT power spectrum, mel filters, log(energy + 1e-10). D = n_mel.
FeatureSequence fbank(const AudioSignal& signal, const FrontendConfig& cfg);

/// Concatenates frames t-left .. t+right (edge frames replicated).
/// T is preserved; output dim is D * (left + 1 + right).
FeatureSequence stack_context(const FeatureSequence& feats, int left, int right);

}  // namespace dvector::frontend
