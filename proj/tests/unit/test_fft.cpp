// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "texstat/fft.hpp"
#include "texstat/rng.hpp"

using namespace texstat;
using fft::Complex;

namespace {

std::vector<Complex> random_signal(Xoshiro256& rng, std::size_t n) {
  std::vector<Complex> v(n);
  for (Complex& c : v) c = {rng.normal(), rng.normal()};
  return v;
}

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Fft, PowerOfTwoPredicate) {
  EXPECT_TRUE(fft::is_power_of_two(1));
  EXPECT_TRUE(fft::is_power_of_two(64));
  EXPECT_FALSE(fft::is_power_of_two(0));
  EXPECT_FALSE(fft::is_power_of_two(12));
}

TEST(Fft, MatchesDirectDft) {
  Xoshiro256 rng(8);
  for (std::size_t n : {1u, 2u, 3u, 8u, 12u, 64u, 128u}) {
    std::vector<Complex> x = random_signal(rng, n);
    const std::vector<Complex> ref = fft::dft(x, false);
    fft::transform(x, false);
    EXPECT_LT(max_diff(x, ref), 1e-10 * double(n)) << n;
  }
}

TEST(Fft, InverseIsUnnormalised) {
  Xoshiro256 rng(9);
  const std::vector<Complex> x = random_signal(rng, 32);
  std::vector<Complex> y = x;
  fft::transform(y, false);
  fft::transform(y, true);
  for (Complex& c : y) c /= 32.0;
  EXPECT_LT(max_diff(x, y), 1e-12);
}

TEST(Fft, ImpulseAndCosine) {
  std::vector<Complex> d(8, 0.0);
  d[0] = 1.0;
  fft::transform(d, false);
  for (const Complex& c : d) EXPECT_NEAR(std::abs(c - Complex(1.0)), 0.0, 1e-15);

  std::vector<Complex> c(16);
  for (std::size_t i = 0; i < 16; ++i) c[i] = std::cos(2 * std::numbers::pi * 3 * double(i) / 16);
  fft::transform(c, false);
  for (std::size_t k = 0; k < 16; ++k) {
    const double expected = (k == 3 || k == 13) ? 8.0 : 0.0;
    EXPECT_NEAR(c[k].real(), expected, 1e-12);
    EXPECT_NEAR(c[k].imag(), 0.0, 1e-12);
  }
}

TEST(Fft, TwoDimensionalMatchesDirect) {
  Xoshiro256 rng(10);
  for (auto [r, cols] : {std::pair<std::size_t, std::size_t>{8, 16}, {6, 5}, {16, 16}}) {
    std::vector<Complex> x = random_signal(rng, r * cols);
    const std::vector<Complex> ref = fft::dft_2d(x, r, cols, false);
    fft::transform_2d(x, r, cols, false);
    EXPECT_LT(max_diff(x, ref), 1e-9);
  }
}
