// SPDX-License-Identifier: Apache-2.0
#include "texstat/pgm.hpp"

#include <cctype>
#include <cstdio>
#include <string>

#include "binary_io.hpp"
#include "texstat/error.hpp"

namespace texstat {

void write_pgm(const std::filesystem::path& path, const GrayBitmap& bitmap) {
  if (bitmap.pixels.size() != bitmap.height * bitmap.width) {
    throw ShapeError("write_pgm: pixel count does not match dimensions");
  }
  const std::string header = "P5\n" + std::to_string(bitmap.width) + " " +
                             std::to_string(bitmap.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), bitmap.pixels.begin(), bitmap.pixels.end());
  io::write_file(path, out);
}

GrayBitmap read_pgm(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> data = io::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < data.size() && !std::isspace(data[pos])) t += static_cast<char>(data[pos++]);
    return t;
  };
  if (token() != "P5") {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + ": not a P5 PGM");
  }
  GrayBitmap bm;
  try {
    bm.width = std::stoul(token());
    bm.height = std::stoul(token());
    if (std::stoul(token()) != 255) {
      throw FormatError(FormatError::Kind::incompatible, path.string() + ": maxval must be 255");
    }
  } catch (const std::logic_error&) {
    throw FormatError(FormatError::Kind::inconsistent, path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace byte after maxval
  if (data.size() < pos + bm.width * bm.height) {
    throw FormatError(FormatError::Kind::truncated, path.string() + ": truncated PGM payload");
  }
  bm.pixels.assign(data.begin() + static_cast<long>(pos),
                   data.begin() + static_cast<long>(pos + bm.width * bm.height));
  return bm;
}

}  // namespace texstat
