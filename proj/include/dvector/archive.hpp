#pragma once

// "DVF1" feature archive.
//
// Layout: the 4-byte magic "DVF1", then zero or more records until end of
// file. Each record is
//
//   u32 id_len, id_len bytes of utf-8 id,
//   u32 T, u32 D,
//   T*D float32 values, row-major.
//
// All integers and floats are little-endian. The same container holds
// filterbank streams, network frame features, d-vector sequences (n x H) and
// phone label streams (T x 1, labels stored as exact float values).

#include "dvector/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dvector::io {

struct ArchiveRecord {
  std::string id;
  Matrix data;
};

void write_archive(std::ostream& os, const std::vector<ArchiveRecord>& records);
void write_archive(const std::filesystem::path& path,
                   const std::vector<ArchiveRecord>& records);

std::vector<ArchiveRecord> read_archive(std::istream& is);
std::vector<ArchiveRecord> read_archive(const std::filesystem::path& path);

// Little-endian primitives shared with the model file reader/writer.
void write_u32(std::ostream& os, std::uint32_t v);
void write_f32(std::ostream& os, float v);
std::uint32_t read_u32(std::istream& is);
float read_f32(std::istream& is);

}  // namespace dvector::io
