// SPDX-License-Identifier: Apache-2.0
#include "texstat/image.hpp"

#include "texstat/error.hpp"

namespace texstat {

Image::Image(std::size_t height, std::size_t width, std::vector<Scalar> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (pixels_.size() != height_ * width_) throw ShapeError("Image: pixel count mismatch");
}

Image Image::from_tensor(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() == 2) return Image(s[0], s[1], {t.values().begin(), t.values().end()});
  if (s.size() == 3 && s[0] == 1) return Image(s[1], s[2], {t.values().begin(), t.values().end()});
  throw ShapeError("Image::from_tensor: expected [H x W] or [1 x H x W], got " + to_string(s));
}

Tensor Image::to_tensor() const { return Tensor(Shape{1, height_, width_}, pixels_); }

Image roll(const Image& image, long dy, long dx) {
  const auto h = static_cast<long>(image.height()), w = static_cast<long>(image.width());
  Image out(image.height(), image.width());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const long ty = ((y + dy) % h + h) % h;
      const long tx = ((x + dx) % w + w) % w;
      out.at(static_cast<std::size_t>(ty), static_cast<std::size_t>(tx)) =
          image.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    }
  }
  return out;
}

double pixel_mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("pixel_mse: image shapes differ");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels()[i]) - static_cast<double>(b.pixels()[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

}  // namespace texstat
