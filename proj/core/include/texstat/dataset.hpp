// SPDX-License-Identifier: Apache-2.0
//
// Synthetic line-texture dataset: seeded generation, the LTDS binary
// container and train/val/test splitting.
//
// LTDS layout, all integers little-endian:
//   "LTDS" | u16 version = 1 | u16 flags = 0 | u32 H | u32 W | u64 count
//   count * H * W pixel bytes, each 0 (background) or 255 (line)
//   per image: u16 line count, then per line
//     u8 orientation (0 horizontal, 1 vertical) | u16 row | u16 col
//     | u16 length | u16 thickness
//
// Version 1 draws with xoshiro256** seeded through SplitMix64; image i uses
// the stream derive_seed(seed, i) so images can be generated independently.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "texstat/image.hpp"
#include "texstat/rng.hpp"

namespace texstat::data {

enum class Orientation : std::uint8_t { horizontal = 0, vertical = 1 };

/// Axis-aligned filled rectangle: `length` along the orientation axis and
/// `thickness` across it, top-left corner at (row, col).
struct LineSpec {
  Orientation orientation = Orientation::horizontal;
  std::uint16_t row = 0;
  std::uint16_t col = 0;
  std::uint16_t length = 1;
  std::uint16_t thickness = 1;

  std::size_t rows_spanned() const noexcept;
  std::size_t cols_spanned() const noexcept;
  bool fits(std::size_t height, std::size_t width) const noexcept;

  friend bool operator==(const LineSpec&, const LineSpec&) = default;
};

struct DatasetConfig {
  std::size_t n_images = 2000;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t lines_min = 1;
  std::size_t lines_max = 3;
  double length_frac_min = 0.2;
  double length_frac_max = 0.8;
  double thickness_frac = 3.0 / 224.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError when the configuration is invalid or admits no
  /// placement.
  void validate() const;
  std::size_t thickness() const;
  std::size_t min_length() const;
  std::size_t max_length() const;
};

struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  /// count * height * width bytes, 0 or 255.
  std::vector<std::uint8_t> pixels;
  std::vector<std::vector<LineSpec>> truth;

  std::size_t count() const noexcept { return truth.size(); }
  std::span<const std::uint8_t> raw(std::size_t index) const;
  /// Record `index` as an image in the internal convention (line = 1).
  Image image(std::size_t index) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Union of the line rectangles; line pixels are 1.
Image rasterize(std::span<const LineSpec> specs, std::size_t height, std::size_t width);

std::vector<LineSpec> sample_specs(const DatasetConfig& config, Xoshiro256& rng);

/// Pure function of `config`; `threads` only changes speed.
Dataset generate(const DatasetConfig& config, unsigned threads = 1);

std::vector<std::uint8_t> serialize(const Dataset& dataset);
Dataset deserialize(std::span<const std::uint8_t> bytes);
void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

/// Seeded permutation partition. Train and val sizes are rounded from the
/// fractions; test takes the remainder.
SplitIndices split(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed);
Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

/// True when some pair of lines overlaps or touches edge-to-edge, in which
/// case they rasterize into one 4-connected component.
bool lines_merge(std::span<const LineSpec> specs);

/// 8-bit P5 PGM. With `invert`, line = 1 renders black.
void export_pgm(const Image& image, const std::filesystem::path& path, bool invert = true);
/// Reads a PGM written by export_pgm back as a binary image (threshold 128).
Image import_pgm(const std::filesystem::path& path, bool inverted = true);

}  // namespace texstat::data
