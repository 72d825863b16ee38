// SPDX-License-Identifier: Apache-2.0
//
// Complex FFTs for the spatial-statistics pipeline. Power-of-two lengths use
// an iterative radix-2 transform; other lengths fall back to a direct DFT.
// Forward uses exp(-2 pi i k n / N); inverse is unnormalised.
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace texstat::fft {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept;

/// In-place 1-D transform of any length.
void transform(std::span<Complex> data, bool inverse);

/// Direct O(n^2) DFT, kept as a reference path.
std::vector<Complex> dft(std::span<const Complex> data, bool inverse);

/// In-place 2-D transform of a row-major rows x cols array.
void transform_2d(std::span<Complex> data, std::size_t rows, std::size_t cols, bool inverse);

/// 2-D transform through the direct DFT only.
std::vector<Complex> dft_2d(std::span<const Complex> data, std::size_t rows, std::size_t cols,
                            bool inverse);

}  // namespace texstat::fft
