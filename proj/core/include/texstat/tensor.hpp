// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace texstat {

#ifdef TEXSTAT_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major tensor. The element count always equals the product of
/// the shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> data);

  static Tensor scalar(Scalar value) { return Tensor(Shape{1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<Scalar> values() noexcept { return data_; }
  std::span<const Scalar> values() const noexcept { return data_; }
  Scalar* data() noexcept { return data_.data(); }
  const Scalar* data() const noexcept { return data_.data(); }

  Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
  Scalar operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Scalar value of a single-element tensor.
  Scalar item() const;

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(Scalar value);

  bool all_finite() const noexcept;
  /// Throws NumericError naming `context` if any element is NaN or infinite.
  void require_finite(std::string_view context) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

}  // namespace texstat
