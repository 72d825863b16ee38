// SPDX-License-Identifier: Apache-2.0
#include "texstat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

#include "binary_io.hpp"
#include "texstat/error.hpp"
#include "texstat/pgm.hpp"

namespace texstat::data {
namespace {

constexpr char kMagic[] = "LTDS";
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 24;

FormatError inconsistent(const std::string& what) {
  return FormatError(FormatError::Kind::inconsistent, "dataset: " + what);
}

}  // namespace

std::size_t LineSpec::rows_spanned() const noexcept {
  return orientation == Orientation::horizontal ? thickness : length;
}

std::size_t LineSpec::cols_spanned() const noexcept {
  return orientation == Orientation::horizontal ? length : thickness;
}

bool LineSpec::fits(std::size_t height, std::size_t width) const noexcept {
  return thickness >= 1 && length >= thickness && row + rows_spanned() <= height &&
         col + cols_spanned() <= width;
}

void DatasetConfig::validate() const {
  if (n_images < 1) throw ConfigError("n_images must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("image size must be positive");
  if (height > 65535 || width > 65535) throw ConfigError("image size must fit in 16 bits");
  if (lines_min < 1 || lines_min > lines_max) throw ConfigError("need 1 <= lines_min <= lines_max");
  if (lines_max > 65535) throw ConfigError("lines_max must fit in 16 bits");
  if (!(length_frac_min > 0) || length_frac_min > length_frac_max || length_frac_max > 1) {
    throw ConfigError("need 0 < length_frac_min <= length_frac_max <= 1");
  }
  if (!(thickness_frac >= 0) || thickness_frac > 1) throw ConfigError("thickness_frac must be in [0, 1]");
  if (thickness() > std::min(height, width)) throw ConfigError("line thickness exceeds the image");
  if (min_length() > max_length()) throw ConfigError("config admits no valid line length");
}

std::size_t DatasetConfig::thickness() const {
  const double side = static_cast<double>(std::min(height, width));
  return static_cast<std::size_t>(std::max(1LL, std::llround(thickness_frac * side)));
}

std::size_t DatasetConfig::min_length() const {
  const double side = static_cast<double>(std::min(height, width));
  const auto lo = static_cast<std::size_t>(std::max(1LL, std::llround(length_frac_min * side)));
  return std::max(lo, thickness());
}

std::size_t DatasetConfig::max_length() const {
  const double side = static_cast<double>(std::min(height, width));
  return static_cast<std::size_t>(std::llround(length_frac_max * side));
}

std::span<const std::uint8_t> Dataset::raw(std::size_t index) const {
  if (index >= count()) throw ConfigError("dataset index out of range");
  return std::span<const std::uint8_t>(pixels).subspan(index * height * width, height * width);
}

Image Dataset::image(std::size_t index) const {
  const auto bytes = raw(index);
  Image out(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) out.pixels()[i] = bytes[i] ? Scalar(1) : Scalar(0);
  return out;
}

Image rasterize(std::span<const LineSpec> specs, std::size_t height, std::size_t width) {
  Image out(height, width);
  for (const LineSpec& s : specs) {
    if (!s.fits(height, width)) throw ConfigError("rasterize: line spec out of bounds");
    for (std::size_t r = s.row; r < s.row + s.rows_spanned(); ++r) {
      for (std::size_t c = s.col; c < s.col + s.cols_spanned(); ++c) out.at(r, c) = 1;
    }
  }
  return out;
}

std::vector<LineSpec> sample_specs(const DatasetConfig& config, Xoshiro256& rng) {
  config.validate();
  const std::size_t thickness = config.thickness();
  const std::size_t lo = config.min_length(), hi = config.max_length();
  const std::size_t count = rng.uniform_int(config.lines_min, config.lines_max);
  std::vector<LineSpec> specs;
  specs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LineSpec s;
    s.orientation = rng.uniform_int(0, 1) == 0 ? Orientation::horizontal : Orientation::vertical;
    s.length = static_cast<std::uint16_t>(rng.uniform_int(lo, hi));
    s.thickness = static_cast<std::uint16_t>(thickness);
    s.row = static_cast<std::uint16_t>(rng.uniform_int(0, config.height - s.rows_spanned()));
    s.col = static_cast<std::uint16_t>(rng.uniform_int(0, config.width - s.cols_spanned()));
    specs.push_back(s);
  }
  return specs;
}

Dataset generate(const DatasetConfig& config, unsigned threads) {
  config.validate();
  const std::size_t plane = config.height * config.width;
  Dataset ds{config.height, config.width, std::vector<std::uint8_t>(config.n_images * plane),
             std::vector<std::vector<LineSpec>>(config.n_images)};

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Xoshiro256 rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
      ds.truth[i] = sample_specs(config, rng);
      const Image img = rasterize(ds.truth[i], config.height, config.width);
      std::uint8_t* dst = ds.pixels.data() + i * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = img.pixels()[p] > 0 ? 255 : 0;
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, config.n_images);
  if (workers == 1) {
    work(0, config.n_images);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (config.n_images + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk, end = std::min(config.n_images, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  return ds;
}

std::vector<std::uint8_t> serialize(const Dataset& dataset) {
  io::ByteWriter w;
  w.tag(kMagic);
  w.u16(kVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(dataset.height));
  w.u32(static_cast<std::uint32_t>(dataset.width));
  w.u64(dataset.count());
  w.bytes(dataset.pixels);
  for (const auto& lines : dataset.truth) {
    w.u16(static_cast<std::uint16_t>(lines.size()));
    for (const LineSpec& s : lines) {
      w.u8(static_cast<std::uint8_t>(s.orientation));
      w.u16(s.row);
      w.u16(s.col);
      w.u16(s.length);
      w.u16(s.thickness);
    }
  }
  return w.buffer();
}

Dataset deserialize(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  if (r.remaining() < 4 || r.tag(4) != kMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "dataset: bad magic (expected LTDS)");
  }
  r.need(kHeaderBytes - 4);
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      "dataset: unsupported version " + std::to_string(version));
  }
  r.u16();
  Dataset ds;
  ds.height = r.u32();
  ds.width = r.u32();
  const std::uint64_t count = r.u64();
  const std::size_t plane = ds.height * ds.width;
  if (plane == 0) throw inconsistent("zero image size");
  if (count > r.remaining() / plane) {
    throw FormatError(FormatError::Kind::truncated, "dataset: image block is truncated");
  }
  const auto pix = r.bytes(count * plane);
  ds.pixels.assign(pix.begin(), pix.end());
  if (std::any_of(ds.pixels.begin(), ds.pixels.end(), [](std::uint8_t b) { return b != 0 && b != 255; })) {
    throw inconsistent("pixel byte outside {0, 255}");
  }
  ds.truth.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint16_t lines = r.u16();
    ds.truth[i].resize(lines);
    for (LineSpec& s : ds.truth[i]) {
      const std::uint8_t o = r.u8();
      if (o > 1) throw inconsistent("orientation byte " + std::to_string(o));
      s.orientation = static_cast<Orientation>(o);
      s.row = r.u16();
      s.col = r.u16();
      s.length = r.u16();
      s.thickness = r.u16();
      if (!s.fits(ds.height, ds.width)) throw inconsistent("line spec out of bounds");
    }
  }
  if (r.remaining() != 0) throw inconsistent("trailing bytes after ground truth");
  return ds;
}

void save(const Dataset& dataset, const std::filesystem::path& path) {
  io::write_file(path, serialize(dataset));
}

Dataset load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

SplitIndices split(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::any_of(fractions.begin(), fractions.end(), [](double f) { return !(f >= 0); }) ||
      std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = dataset.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);

  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n))));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<long>(std::min(n, n_train)));
  out.val.assign(order.begin() + static_cast<long>(out.train.size()),
                 order.begin() + static_cast<long>(out.train.size() + n_val));
  out.test.assign(order.begin() + static_cast<long>(out.train.size() + n_val), order.end());
  return out;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out{dataset.height, dataset.width, {}, {}};
  out.pixels.reserve(indices.size() * dataset.height * dataset.width);
  for (std::size_t i : indices) {
    const auto bytes = dataset.raw(i);
    out.pixels.insert(out.pixels.end(), bytes.begin(), bytes.end());
    out.truth.push_back(dataset.truth[i]);
  }
  return out;
}

bool lines_merge(std::span<const LineSpec> specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      const LineSpec& a = specs[i];
      const LineSpec& b = specs[j];
      const long a_r0 = a.row, a_r1 = a.row + static_cast<long>(a.rows_spanned());
      const long a_c0 = a.col, a_c1 = a.col + static_cast<long>(a.cols_spanned());
      const long b_r0 = b.row, b_r1 = b.row + static_cast<long>(b.rows_spanned());
      const long b_c0 = b.col, b_c1 = b.col + static_cast<long>(b.cols_spanned());
      const bool rows_overlap = a_r0 < b_r1 && b_r0 < a_r1;
      const bool cols_overlap = a_c0 < b_c1 && b_c0 < a_c1;
      const bool rows_touch = a_r0 <= b_r1 && b_r0 <= a_r1;
      const bool cols_touch = a_c0 <= b_c1 && b_c0 <= a_c1;
      // Overlap, or edge adjacency along one axis with overlap on the other.
      if ((rows_overlap && cols_touch) || (cols_overlap && rows_touch)) return true;
    }
  }
  return false;
}

void export_pgm(const Image& image, const std::filesystem::path& path, bool invert) {
  GrayBitmap bm{image.height(), image.width(), std::vector<std::uint8_t>(image.size())};
  for (std::size_t i = 0; i < image.size(); ++i) {
    const Scalar v = image.pixels()[i];
    if (!(v >= 0 && v <= 1)) throw ConfigError("export_pgm: pixel value outside [0, 1]");
    const auto level = static_cast<std::uint8_t>(std::lround(static_cast<double>(v) * 255.0));
    bm.pixels[i] = invert ? static_cast<std::uint8_t>(255 - level) : level;
  }
  write_pgm(path, bm);
}

Image import_pgm(const std::filesystem::path& path, bool inverted) {
  const GrayBitmap bm = read_pgm(path);
  Image out(bm.height, bm.width);
  for (std::size_t i = 0; i < bm.pixels.size(); ++i) {
    const bool dark = bm.pixels[i] < 128;
    out.pixels()[i] = (inverted ? dark : !dark) ? Scalar(1) : Scalar(0);
  }
  return out;
}

}  // namespace texstat::data
