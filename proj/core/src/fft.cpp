// SPDX-License-Identifier: Apache-2.0
#include "texstat/fft.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>
#include <utility>

#include "texstat/error.hpp"

namespace texstat::fft {
namespace {

// exp(-2 pi i k / n) for k < n/2, cached per thread and length.
const std::vector<Complex>& twiddles(std::size_t n) {
  thread_local std::unordered_map<std::size_t, std::vector<Complex>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Complex> table(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    table[k] = Complex(std::cos(angle), std::sin(angle));
  }
  return cache.emplace(n, std::move(table)).first->second;
}

void radix2(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const std::vector<Complex>& table = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t k = 0; k < half; ++k) {
      const Complex w = inverse ? std::conj(table[k * stride]) : table[k * stride];
      for (std::size_t start = 0; start < n; start += len) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w;
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

std::vector<Complex> dft(std::span<const Complex> data, bool inverse) {
  const std::size_t n = data.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t phase = (k * j) % n;
      const double angle =
          sign * 2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(n);
      sum += data[j] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = sum;
  }
  return out;
}

void transform(std::span<Complex> data, bool inverse) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    radix2(data, inverse);
    return;
  }
  const std::vector<Complex> out = dft(data, inverse);
  std::copy(out.begin(), out.end(), data.begin());
}

void transform_2d(std::span<Complex> data, std::size_t rows, std::size_t cols, bool inverse) {
  if (data.size() != rows * cols) throw ShapeError("transform_2d: size mismatch");
  for (std::size_t r = 0; r < rows; ++r) transform(data.subspan(r * cols, cols), inverse);
  std::vector<Complex> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = data[r * cols + c];
    transform(column, inverse);
    for (std::size_t r = 0; r < rows; ++r) data[r * cols + c] = column[r];
  }
}

std::vector<Complex> dft_2d(std::span<const Complex> data, std::size_t rows, std::size_t cols,
                            bool inverse) {
  if (data.size() != rows * cols) throw ShapeError("dft_2d: size mismatch");
  std::vector<Complex> out(data.begin(), data.end());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = dft(std::span<const Complex>(out).subspan(r * cols, cols), inverse);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<long>(r * cols));
  }
  std::vector<Complex> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = out[r * cols + c];
    const auto col = dft(column, inverse);
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = col[r];
  }
  return out;
}

}  // namespace texstat::fft
