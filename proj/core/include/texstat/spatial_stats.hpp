// SPDX-License-Identifier: Apache-2.0
//
// Two-point spatial statistics under a periodic boundary. A StatsMap is
// indexed by the lag r = (dy, dx) with zero lag at (0, 0) and normalised by
// N = H * W, so the zero-lag autocorrelation of a binary image is its volume
// fraction.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

#include "texstat/autodiff.hpp"
#include "texstat/image.hpp"

namespace texstat::stats {

enum class Metric { mse, l2_norm };

std::string_view to_string(Metric metric);
/// Accepts "mse" and "l2_norm" (alias "l2"). Throws ConfigError otherwise.
Metric parse_metric(std::string_view name);

class StatsMap {
 public:
  StatsMap() = default;
  StatsMap(std::size_t height, std::size_t width, std::vector<Scalar> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  double normalization() const noexcept { return static_cast<double>(height_ * width_); }

  /// Value at lag (dy, dx); negative lags wrap.
  Scalar at(long dy, long dx) const;
  Scalar zero_lag() const { return values_.at(0); }

  const std::vector<Scalar>& values() const noexcept { return values_; }
  bool same_shape(const StatsMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const StatsMap&, const StatsMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Scalar> values_;
};

/// Selects a pair of state indicator fields for cross-correlation.
struct LocalStatePair {
  std::size_t h = 0;
  std::size_t h_prime = 0;
};

/// f[r] = (1/N) sum_x m[x] m[x + r], via the power spectrum.
StatsMap autocorrelation(const Image& image);

/// f[r] = (1/N) sum_x a[x] b[x + r], via FFT. cross_correlation(a, a) equals
/// autocorrelation(a).
StatsMap cross_correlation(const Image& a, const Image& b);

/// Cross-correlation between two fields of a multi-state microstructure.
StatsMap cross_correlation(const std::vector<Image>& state_fields, LocalStatePair pair);

/// Direct periodic sum. Oracle only; refuses images larger than 4096 pixels.
StatsMap brute_force_autocorr(const Image& image);

/// Wiener-Khinchin route evaluated with the direct DFT instead of the FFT.
StatsMap autocorrelation_via_dft(const Image& image);

double stats_distance(const StatsMap& a, const StatsMap& b, Metric metric);

/// Distance between the statistics of a constant image `x` and the
/// differentiable reconstruction `x_hat` (H*W elements, any shape).
ad::Var stats_loss(const Image& x, ad::Var x_hat, Metric metric);

/// Moves zero lag to (H/2, W/2).
StatsMap fftshift_view(const StatsMap& s);
/// Inverse of fftshift_view.
StatsMap ifftshift_view(const StatsMap& s);

/// Binary dump: "STAT", u16 version=1, u16 pad, u32 H, u32 W, then H*W
/// little-endian float64 values.
void write_stats_raw(const StatsMap& s, const std::filesystem::path& path);
StatsMap read_stats_raw(const std::filesystem::path& path);

/// 8-bit P5 PGM of the fftshifted, min-max normalised map.
void write_stats_pgm(const StatsMap& s, const std::filesystem::path& path);

}  // namespace texstat::stats
