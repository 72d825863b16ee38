// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "texstat/image.hpp"
#include "texstat/rng.hpp"
#include "texstat/tensor.hpp"
#include "temp_dir.hpp"

namespace texstat::testing {

inline std::vector<Scalar> to_vector(std::span<const Scalar> s) { return {s.begin(), s.end()}; }

inline Tensor random_tensor(Xoshiro256& rng, Shape shape, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (Scalar& v : t.values()) v = Scalar(lo + (hi - lo) * rng.uniform01());
  return t;
}

inline Image random_image(Xoshiro256& rng, std::size_t h, std::size_t w, bool binary) {
  Image img(h, w);
  for (Scalar& p : img.pixels()) p = binary ? Scalar(rng.uniform01() < 0.4) : Scalar(rng.uniform01());
  return img;
}


}  // namespace texstat::testing
