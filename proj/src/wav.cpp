#include "dvector/archive.hpp"
#include "dvector/errors.hpp"
#include "dvector/frontend.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace dvector::frontend {
namespace {

std::uint16_t read_u16(std::istream& is) {
  std::array<unsigned char, 2> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 2)) {
    throw FormatError("wav: truncated header");
  }
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32_checked(std::istream& is, const char* what) {
  try {
    return io::read_u32(is);
  } catch (const FormatError&) {
    throw FormatError(std::string("wav: truncated ") + what);
  }
}

void write_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

std::string read_tag(std::istream& is) {
  std::string tag(4, '\0');
  if (!is.read(tag.data(), 4)) return {};
  return tag;
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PathError("cannot open wav: " + path.string());

  if (read_tag(is) != "RIFF") throw FormatError("wav: missing RIFF tag in " + path.string());
  read_u32_checked(is, "RIFF size");
  if (read_tag(is) != "WAVE") throw FormatError("wav: missing WAVE tag in " + path.string());

  bool have_fmt = false;
  AudioSignal signal;
  for (;;) {
    const std::string tag = read_tag(is);
    if (tag.empty()) break;
    const std::uint32_t size = read_u32_checked(is, "chunk size");
    if (tag == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too small");
      const auto format = read_u16(is);
      const auto channels = read_u16(is);
      const auto rate = read_u32_checked(is, "sample rate");
      read_u32_checked(is, "byte rate");
      read_u16(is);  // block align
      const auto bits = read_u16(is);
      is.ignore(size - 16 + (size & 1));
      if (format != 1) throw UnsupportedFormatError("wav: only PCM encoding is supported");
      if (channels != 1) throw UnsupportedFormatError("wav: only mono is supported");
      if (bits != 16) throw UnsupportedFormatError("wav: only 16-bit samples are supported");
      if (rate == 0) throw FormatError("wav: zero sample rate");
      signal.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      if (size % 2 != 0) throw FormatError("wav: odd data chunk size");
      std::vector<char> raw(size);
      if (size > 0 && !is.read(raw.data(), size)) throw FormatError("wav: truncated data chunk");
      signal.samples.resize(size / 2);
      for (std::size_t i = 0; i < signal.samples.size(); ++i) {
        const auto lo = static_cast<unsigned char>(raw[2 * i]);
        const auto hi = static_cast<unsigned char>(raw[2 * i + 1]);
        const auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        signal.samples[i] = static_cast<double>(v) / 32768.0;
      }
      if (signal.samples.empty()) throw FormatError("wav: no samples in " + path.string());
      return signal;
    } else {
      is.ignore(size + (size & 1));
    }
  }
  throw FormatError("wav: no data chunk in " + path.string());
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PathError("cannot open for writing: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);
  os.write("RIFF", 4);
  io::write_u32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  io::write_u32(os, 16);
  write_u16(os, 1);
  write_u16(os, 1);
  io::write_u32(os, static_cast<std::uint32_t>(signal.sample_rate));
  io::write_u32(os, static_cast<std::uint32_t>(signal.sample_rate) * 2);
  write_u16(os, 2);
  write_u16(os, 16);
  os.write("data", 4);
  io::write_u32(os, data_bytes);
  for (double s : signal.samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    write_u16(os, static_cast<std::uint16_t>(v));
  }
}

}  // namespace dvector::frontend
