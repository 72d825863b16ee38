// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "texstat/autodiff.hpp"

namespace texstat::ad {

/// Builds a scalar on `tape` from the differentiable leaf `x`.
using ScalarFunction = std::function<Var(Tape& tape, Var x)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares backward() against central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h on every coordinate of `input`.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradientCheck check_gradient(const ScalarFunction& f, const Tensor& input, double step);

/// Same, restricted to the listed coordinates.
GradientCheck check_gradient(const ScalarFunction& f, const Tensor& input, double step,
                             std::span<const std::size_t> coordinates);

}  // namespace texstat::ad
