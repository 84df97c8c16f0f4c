#include "dvector/errors.hpp"
#include "dvector/frontend.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace dvector;
using namespace dvector::frontend;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("dvector_test_" + name); }

void put_u32(std::ofstream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::ofstream& os, std::uint16_t v) {
  os.put(static_cast<char>(v & 0xff));
  os.put(static_cast<char>(v >> 8));
}

// Hand-assembled RIFF header, independent of write_wav.
void write_raw_wav(const fs::path& p, const std::vector<std::int16_t>& samples, std::uint16_t channels = 1,
                   std::uint16_t format = 1, std::uint16_t bits = 16) {
  std::ofstream os(p, std::ios::binary);
  const auto bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + bytes);
  os.write("WAVEfmt ", 8);
  put_u32(os, 16);
  put_u16(os, format);
  put_u16(os, channels);
  put_u32(os, 16000);
  put_u32(os, 16000 * 2 * channels);
  put_u16(os, static_cast<std::uint16_t>(2 * channels));
  put_u16(os, bits);
  os.write("data", 4);
  put_u32(os, bytes);
  for (auto s : samples) put_u16(os, static_cast<std::uint16_t>(s));
}

AudioSignal sine(double hz, double seconds, int rate = 16000, double amp = 0.5) {
  AudioSignal s;
  s.sample_rate = rate;
  const int n = static_cast<int>(seconds * rate);
  for (int i = 0; i < n; ++i) s.samples.push_back(amp * std::sin(2 * std::numbers::pi * hz * i / rate));
  return s;
}

}  // namespace

TEST_CASE("read_wav scales 16-bit samples by 1/32768") {
  const auto p = temp_path("scale.wav");
  write_raw_wav(p, {16384, -32768, 0, 32767});
  const auto sig = read_wav(p);
  CHECK(sig.sample_rate == 16000);
  REQUIRE(sig.samples.size() == 4);  // data bytes / 2
  CHECK(sig.samples[0] == 0.5);
  CHECK(sig.samples[1] == -1.0);
  CHECK(sig.samples[2] == 0.0);
  CHECK(sig.samples[3] == doctest::Approx(32767.0 / 32768.0));
}

TEST_CASE("read_wav rejects empty, malformed and unsupported files") {
  const auto p = temp_path("bad.wav");
  write_raw_wav(p, {});
  CHECK_THROWS_AS(read_wav(p), FormatError);

  write_raw_wav(p, {1, 2, 3, 4}, /*channels=*/2);
  CHECK_THROWS_AS(read_wav(p), UnsupportedFormatError);
  write_raw_wav(p, {1, 2}, 1, /*format=*/3);
  CHECK_THROWS_AS(read_wav(p), UnsupportedFormatError);
  write_raw_wav(p, {1, 2}, 1, 1, /*bits=*/8);
  CHECK_THROWS_AS(read_wav(p), UnsupportedFormatError);

  {
    std::ofstream os(p, std::ios::binary);
    os << "RIFX....garbage";
  }
  CHECK_THROWS_AS(read_wav(p), FormatError);
  CHECK_THROWS_AS(read_wav(temp_path("does_not_exist.wav")), DataError);
}

TEST_CASE("write_wav then read_wav preserves quantized samples") {
  AudioSignal s;
  s.sample_rate = 8000;
  s.samples = {0.0, 0.25, -0.5, 0.999};
  const auto p = temp_path("rt.wav");
  write_wav(p, s);
  const auto back = read_wav(p);
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.samples[i] == doctest::Approx(s.samples[i]).epsilon(1e-4));
}

TEST_CASE("pre_emphasize follows y[n] = x[n] - c x[n-1], y[0] = (1-c) x[0]") {
  AudioSignal x{{1, 1, 1}, 16000};
  const auto y = pre_emphasize(x, 0.97);
  for (double v : y.samples) CHECK(v == doctest::Approx(0.03));

  const auto z = pre_emphasize(AudioSignal{{1, 0}, 16000}, 0.5);
  CHECK(z.samples[0] == doctest::Approx(0.5));
  CHECK(z.samples[1] == doctest::Approx(-0.5));

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    AudioSignal s;
    for (int i = 0; i < 50; ++i) s.samples.push_back(u(rng));
    CHECK(pre_emphasize(s, 0.0).samples == s.samples);
  }
}

TEST_CASE("frame_signal frame count is floor((N-L)/S)+1 with drop-tail") {
  FrontendConfig cfg;
  cfg.fft_size = 0;
  cfg.frame_len = 0.025;
  cfg.frame_shift = 0.010;
  AudioSignal s;
  s.sample_rate = 1000;  // L = 25, S = 10

  s.samples.assign(100, 0.1);
  CHECK(frame_signal(s, cfg).size() == 8);
  s.samples.assign(25, 0.1);
  CHECK(frame_signal(s, cfg).size() == 1);
  s.samples.assign(24, 0.1);
  CHECK_THROWS_AS(frame_signal(s, cfg), TooShortError);

  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = std::uniform_int_distribution<int>(4, 60)(rng);
    const int shift = std::uniform_int_distribution<int>(1, len)(rng);
    const int n = std::uniform_int_distribution<int>(len, 400)(rng);
    cfg.frame_len = len / 1000.0;
    cfg.frame_shift = shift / 1000.0;
    s.samples.assign(n, 0.2);
    const auto frames = frame_signal(s, cfg);
    CHECK(frames.size() == static_cast<std::size_t>((n - len) / shift + 1));
    CHECK(frames.front().size() == static_cast<std::size_t>(len));
  }
}

TEST_CASE("frame_signal applies a Hamming window") {
  FrontendConfig cfg;
  AudioSignal s;
  s.samples.assign(400, 1.0);
  const auto frames = frame_signal(s, cfg);
  REQUIRE(frames.size() == 1);
  const auto w = hamming_window(400);
  CHECK(frames[0][0] == doctest::Approx(0.08));
  CHECK(frames[0][199] == doctest::Approx(w[199]));
}

TEST_CASE("FrontendConfig validation") {
  FrontendConfig cfg;
  CHECK_NOTHROW(cfg.validate(16000));
  auto bad = cfg;
  bad.frame_shift = 0.05;
  CHECK_THROWS_AS(bad.validate(16000), ConfigError);
  bad = cfg;
  bad.n_mel = 1;
  CHECK_THROWS_AS(bad.validate(16000), ConfigError);
  bad = cfg;
  bad.fft_size = 256;  // < 400 samples
  CHECK_THROWS_AS(bad.validate(16000), ConfigError);
  bad = cfg;
  bad.fft_size = 500;
  CHECK_THROWS_AS(bad.validate(16000), ConfigError);
  bad = cfg;
  bad.preemph = 1.0;
  CHECK_THROWS_AS(bad.validate(16000), ConfigError);
}

TEST_CASE("fbank of silence is log(1e-10) everywhere") {
  AudioSignal s;
  s.samples.assign(16000, 0.0);
  FrontendConfig cfg;
  const auto f = fbank(s, cfg);
  CHECK(f.dim() == 40);
  CHECK(f.num_frames() == 98);
  for (Eigen::Index t = 0; t < f.num_frames(); ++t)
    for (Eigen::Index d = 0; d < f.dim(); ++d) CHECK(f.frames(t, d) == doctest::Approx(std::log(1e-10)));
}

TEST_CASE("fbank outputs are finite for random finite signals") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  FrontendConfig cfg;
  cfg.n_mel = 20;
  for (int trial = 0; trial < 5; ++trial) {
    AudioSignal s;
    for (int i = 0; i < 4000; ++i) s.samples.push_back(trial % 2 ? u(rng) : 1e-30 * u(rng));
    const auto f = fbank(s, cfg);
    CHECK(f.dim() == 20);
    CHECK(f.frames.allFinite());
  }
}

TEST_CASE("fbank peak for a 1 kHz tone is the filter centred nearest 1 kHz") {
  // Centres from 2595 log10(1 + f/700), spaced evenly between mel(20 Hz)
  // and mel(8000 Hz) with n_mel + 2 edge points.
  FrontendConfig cfg;
  const int n_mel = cfg.n_mel;
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double lo = mel(20.0), hi = mel(8000.0);
  int nearest = 0;
  double best = 1e9;
  for (int b = 0; b < n_mel; ++b) {
    const double centre = inv(lo + (b + 1) * (hi - lo) / (n_mel + 1));
    if (std::abs(centre - 1000.0) < best) {
      best = std::abs(centre - 1000.0);
      nearest = b;
    }
  }

  const auto f = fbank(sine(1000.0, 0.5), cfg);
  for (Eigen::Index t = 0; t < f.num_frames(); ++t) {
    Eigen::Index arg = 0;
    f.frames.row(t).maxCoeff(&arg);
    CHECK(arg == nearest);
  }
}

TEST_CASE("fbank mean normalization zeroes the per-dimension mean") {
  FrontendConfig cfg;
  cfg.mean_normalize = true;
  const auto f = fbank(sine(440.0, 0.3), cfg);
  CHECK(f.frames.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("stack_context") {
  FeatureSequence fs;
  fs.frames.resize(4, 2);
  fs.frames << 1, 2, 3, 4, 5, 6, 7, 8;

  SUBCASE("zero context is the identity") {
    const auto out = stack_context(fs, 0, 0);
    CHECK(out.frames == fs.frames);
  }
  SUBCASE("edges replicate first and last frame") {
    const auto out = stack_context(fs, 1, 2);
    REQUIRE(out.dim() == 8);
    REQUIRE(out.num_frames() == 4);
    Eigen::RowVectorXd first(8), last(8);
    first << 1, 2, 1, 2, 3, 4, 5, 6;
    last << 5, 6, 7, 8, 7, 8, 7, 8;
    CHECK(out.frames.row(0) == first);
    CHECK(out.frames.row(3) == last);
  }
  SUBCASE("single frame with 10+10 context repeats 21 times") {
    FeatureSequence one;
    one.frames = Matrix::Random(1, 40);
    const auto out = stack_context(one, 10, 10);
    REQUIRE(out.dim() == 840);
    for (int k = 0; k < 21; ++k) CHECK(out.frames.row(0).segment(k * 40, 40) == one.frames.row(0));
  }
  SUBCASE("T preserved and D multiplied for random shapes") {
    std::mt19937 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
      const int t = std::uniform_int_distribution<int>(1, 30)(rng);
      const int d = std::uniform_int_distribution<int>(1, 8)(rng);
      const int l = std::uniform_int_distribution<int>(0, 12)(rng);
      const int r = std::uniform_int_distribution<int>(0, 12)(rng);
      FeatureSequence x;
      x.frames = Matrix::Random(t, d);
      const auto out = stack_context(x, l, r);
      CHECK(out.num_frames() == t);
      CHECK(out.dim() == d * (l + 1 + r));
      // The centre block is the original frame.
      CHECK(out.frames.middleCols(l * d, d) == x.frames);
    }
  }
  CHECK_THROWS_AS(stack_context(fs, -1, 0), ConfigError);
}
