// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "texstat/tensor.hpp"

namespace texstat {

/// Single-channel image with values in [0,1]; 1 is line material.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, Scalar fill = Scalar(0))
      : height_(height), width_(width), pixels_(height * width, fill) {}
  Image(std::size_t height, std::size_t width, std::vector<Scalar> pixels);

  /// Accepts [H x W] or [1 x H x W].
  static Image from_tensor(const Tensor& t);
  /// [1 x H x W], the layout the network consumes.
  Tensor to_tensor() const;

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  Scalar& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  Scalar at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }

  std::vector<Scalar>& pixels() noexcept { return pixels_; }
  const std::vector<Scalar>& pixels() const noexcept { return pixels_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Scalar> pixels_;
};

/// Circular shift: out[(r + dy) mod H, (c + dx) mod W] = in[r, c].
Image roll(const Image& image, long dy, long dx);

/// Mean of squared pixel differences.
double pixel_mse(const Image& a, const Image& b);

}  // namespace texstat
