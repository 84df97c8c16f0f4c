#include "dvector/archive.hpp"

#include "dvector/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace dvector {

void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite value in " + what);
}

namespace io {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'V', 'F', '1'};

template <typename T>
std::array<char, sizeof(T)> to_le_bytes(T v) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return bytes;
}

template <typename T>
T from_le_bytes(std::array<char, sizeof(T)> bytes) {
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  return std::bit_cast<T>(bytes);
}

template <typename T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes{};
  if (!is.read(bytes.data(), bytes.size())) {
    throw FormatError("archive truncated");
  }
  return from_le_bytes<T>(bytes);
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) {
  auto b = to_le_bytes(v);
  os.write(b.data(), b.size());
}

void write_f32(std::ostream& os, float v) {
  auto b = to_le_bytes(v);
  os.write(b.data(), b.size());
}

std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
float read_f32(std::istream& is) { return read_le<float>(is); }

void write_archive(std::ostream& os, const std::vector<ArchiveRecord>& records) {
  os.write(kMagic.data(), kMagic.size());
  for (const auto& rec : records) {
    require_finite(rec.data, "archive record " + rec.id);
    write_u32(os, static_cast<std::uint32_t>(rec.id.size()));
    os.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
    write_u32(os, static_cast<std::uint32_t>(rec.data.rows()));
    write_u32(os, static_cast<std::uint32_t>(rec.data.cols()));
    for (Eigen::Index r = 0; r < rec.data.rows(); ++r)
      for (Eigen::Index c = 0; c < rec.data.cols(); ++c)
        write_f32(os, static_cast<float>(rec.data(r, c)));
  }
  if (!os) throw DataError("failed writing archive");
}

void write_archive(const std::filesystem::path& path,
                   const std::vector<ArchiveRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PathError("cannot open for writing: " + path.string());
  write_archive(os, records);
}

std::vector<ArchiveRecord> read_archive(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("not a DVF1 archive (bad magic)");
  }
  std::vector<ArchiveRecord> records;
  while (is.peek() != std::char_traits<char>::eof()) {
    ArchiveRecord rec;
    const auto id_len = read_u32(is);
    rec.id.resize(id_len);
    if (id_len > 0 && !is.read(rec.id.data(), id_len)) {
      throw FormatError("archive truncated in record id");
    }
    const auto rows = read_u32(is);
    const auto cols = read_u32(is);
    rec.data.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) rec.data(r, c) = read_f32(is);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ArchiveRecord> read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PathError("cannot open archive: " + path.string());
  return read_archive(is);
}

}  // namespace io
}  // namespace dvector
