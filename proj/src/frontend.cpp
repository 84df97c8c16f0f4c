#include "dvector/frontend.hpp"

#include "dvector/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace dvector::frontend {
namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// fftw planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        in_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_.get(), out_.get(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Zero-pads frame to n and writes |X[k]|^2 for k = 0..n/2.
  void power_spectrum(std::span<const double> frame, std::span<double> power) {
    std::fill(in_.get(), in_.get() + n_, 0.0);
    std::copy(frame.begin(), frame.end(), in_.get());
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k) {
      const double re = out_.get()[k][0];
      const double im = out_.get()[k][1];
      power[k] = re * re + im * im;
    }
  }

 private:
  int n_;
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

// Raw (unwindowed) frames, drop-tail.
std::vector<std::vector<double>> extract_frames(const AudioSignal& signal,
                                                const FrontendConfig& cfg) {
  const int len = cfg.frame_length_samples(signal.sample_rate);
  const int shift = cfg.frame_shift_samples(signal.sample_rate);
  const auto n = static_cast<long>(signal.samples.size());
  if (n < len) {
    throw TooShortError("signal has " + std::to_string(n) + " samples, fewer than one frame (" +
                        std::to_string(len) + ")");
  }
  const long count = (n - len) / shift + 1;
  std::vector<std::vector<double>> frames(count);
  for (long f = 0; f < count; ++f) {
    const auto begin = signal.samples.begin() + f * shift;
    frames[f].assign(begin, begin + len);
  }
  return frames;
}

}  // namespace

void FrontendConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (n_mel < 2) throw ConfigError("frontend.n_mel must be >= 2");
  if (frame_len <= 0 || frame_shift <= 0) throw ConfigError("frame_len and frame_shift must be positive");
  if (frame_shift > frame_len) throw ConfigError("frontend.frame_shift must not exceed frame_len");
  if (preemph < 0 || preemph >= 1) throw ConfigError("frontend.preemph must be in [0, 1)");
  const int len = frame_length_samples(sample_rate);
  if (len < 1 || frame_shift_samples(sample_rate) < 1) {
    throw ConfigError("frame length or shift rounds to zero samples");
  }
  if (fft_size != 0) {
    if (!is_power_of_two(fft_size)) throw ConfigError("frontend.fft_size must be a power of two");
    if (fft_size < len) throw ConfigError("frontend.fft_size must be >= frame length in samples");
  }
  const double high = resolved_mel_high(sample_rate);
  if (mel_low < 0 || high <= mel_low || high > sample_rate / 2.0) {
    throw ConfigError("mel band must satisfy 0 <= mel_low < mel_high <= Nyquist");
  }
}

int FrontendConfig::frame_length_samples(int sample_rate) const {
  return static_cast<int>(std::lround(frame_len * sample_rate));
}

int FrontendConfig::frame_shift_samples(int sample_rate) const {
  return static_cast<int>(std::lround(frame_shift * sample_rate));
}

int FrontendConfig::resolved_fft_size(int sample_rate) const {
  if (fft_size != 0) return fft_size;
  int n = 1;
  while (n < frame_length_samples(sample_rate)) n <<= 1;
  return n;
}

double FrontendConfig::resolved_mel_high(int sample_rate) const {
  return mel_high > 0 ? mel_high : sample_rate / 2.0 + mel_high;
}

AudioSignal pre_emphasize(const AudioSignal& signal, double coeff) {
  AudioSignal out = signal;
  pre_emphasize_inplace(out.samples, coeff);
  return out;
}

void pre_emphasize_inplace(std::span<double> x, double coeff) {
  if (x.empty()) return;
  for (std::size_t n = x.size() - 1; n > 0; --n) x[n] -= coeff * x[n - 1];
  x[0] -= coeff * x[0];
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length, 1.0);
  if (length == 1) return w;
  for (int i = 0; i < length; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (length - 1));
  }
  return w;
}

std::vector<std::vector<double>> frame_signal(const AudioSignal& signal,
                                              const FrontendConfig& cfg) {
  cfg.validate(signal.sample_rate);
  auto frames = extract_frames(signal, cfg);
  const auto window = hamming_window(cfg.frame_length_samples(signal.sample_rate));
  for (auto& f : frames)
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= window[i];
  return frames;
}

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

MelBanks::MelBanks(const FrontendConfig& cfg, int sample_rate) {
  const int fft = cfg.resolved_fft_size(sample_rate);
  const int num_fft_bins = fft / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / fft;
  const double mel_lo = hz_to_mel(cfg.mel_low);
  const double mel_hi = hz_to_mel(cfg.resolved_mel_high(sample_rate));
  const double delta = (mel_hi - mel_lo) / (cfg.n_mel + 1);

  filters_.resize(cfg.n_mel);
  center_hz_.resize(cfg.n_mel);
  for (int b = 0; b < cfg.n_mel; ++b) {
    const double left = mel_lo + b * delta;
    const double center = left + delta;
    const double right = center + delta;
    center_hz_[b] = mel_to_hz(center);
    Filter& filt = filters_[b];
    filt.first_fft_bin = -1;
    for (int k = 0; k < num_fft_bins; ++k) {
      const double mel = hz_to_mel(k * bin_hz);
      if (mel <= left || mel >= right) {
        if (filt.first_fft_bin >= 0) break;
        continue;
      }
      const double w = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
      if (filt.first_fft_bin < 0) filt.first_fft_bin = k;
      filt.weights.push_back(w);
    }
    if (filt.first_fft_bin < 0) filt.first_fft_bin = 0;  // narrower than one FFT bin
  }
}

void MelBanks::compute(std::span<const double> power, std::span<double> out) const {
  for (std::size_t b = 0; b < filters_.size(); ++b) {
    const Filter& f = filters_[b];
    double e = 0.0;
    for (std::size_t i = 0; i < f.weights.size(); ++i) e += f.weights[i] * power[f.first_fft_bin + i];
    out[b] = e;
  }
}

FeatureSequence fbank(const AudioSignal& signal, const FrontendConfig& cfg) {
  cfg.validate(signal.sample_rate);
  auto frames = extract_frames(signal, cfg);
  const auto window = hamming_window(cfg.frame_length_samples(signal.sample_rate));
  const int fft_size = cfg.resolved_fft_size(signal.sample_rate);
  const MelBanks banks(cfg, signal.sample_rate);
  RealFft fft(fft_size);

  FeatureSequence out;
  out.frame_shift = cfg.frame_shift;
  out.frames.resize(static_cast<Eigen::Index>(frames.size()), cfg.n_mel);
  std::vector<double> power(fft_size / 2 + 1);
  std::vector<double> energies(cfg.n_mel);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto& frame = frames[t];
    pre_emphasize_inplace(frame, cfg.preemph);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] *= window[i];
    fft.power_spectrum(frame, power);
    banks.compute(power, energies);
    for (int b = 0; b < cfg.n_mel; ++b) {
      out.frames(static_cast<Eigen::Index>(t), b) = std::log(energies[b] + kLogFloor);
    }
  }
  if (cfg.mean_normalize) out.frames.rowwise() -= out.frames.colwise().mean();
  require_finite(out.frames, "fbank output");
  return out;
}

FeatureSequence stack_context(const FeatureSequence& feats, int left, int right) {
  if (left < 0 || right < 0) throw ConfigError("context sizes must be non-negative");
  const Eigen::Index frames = feats.num_frames();
  const Eigen::Index dim = feats.dim();
  const int width = left + 1 + right;
  FeatureSequence out = feats;
  out.frames.resize(frames, dim * width);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int k = 0; k < width; ++k) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t - left + k, 0, frames - 1);
      out.frames.row(t).segment(k * dim, dim) = feats.frames.row(src);
    }
  }
  return out;
}

}  // namespace dvector::frontend
