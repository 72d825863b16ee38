// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace texstat {

struct GrayBitmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
};

/// Binary P5 PGM with maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayBitmap& bitmap);
GrayBitmap read_pgm(const std::filesystem::path& path);

}  // namespace texstat
