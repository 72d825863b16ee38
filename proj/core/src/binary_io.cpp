// SPDX-License-Identifier: Apache-2.0
#include "binary_io.hpp"

#include <cstdio>

namespace texstat::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  std::size_t n = 0;
  while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0) out.insert(out.end(), chunk, chunk + n);
  const bool failed = std::ferror(f) != 0;
  std::fclose(f);
  if (failed) throw IoError("read error on " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open " + path.string() + " for writing");
  const std::size_t written = data.empty() ? 0 : std::fwrite(data.data(), 1, data.size(), f);
  const bool failed = std::fclose(f) != 0 || written != data.size();
  if (failed) throw IoError("write error on " + path.string());
}

}  // namespace texstat::io
