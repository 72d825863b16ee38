// SPDX-License-Identifier: Apache-2.0
#include "texstat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "texstat/error.hpp"

namespace texstat::ad {
namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  const double v = out.value().item();
  if (!std::isfinite(v)) throw NumericError("check_gradient: function value is not finite");
  return v;
}

}  // namespace

GradientCheck check_gradient(const ScalarFunction& f, const Tensor& input, double step,
                             std::span<const std::size_t> coordinates) {
  if (!(step > 0)) throw ConfigError("check_gradient: step must be positive");

  Tape tape;
  Var x = tape.variable(input);
  Var out = f(tape, x);
  if (!std::isfinite(static_cast<double>(out.value().item()))) {
    throw NumericError("check_gradient: function value is not finite");
  }
  tape.backward(out);
  const Tensor analytic = x.grad();

  GradientCheck result;
  Tensor probe = input;
  for (std::size_t i : coordinates) {
    const Scalar original = probe[i];
    probe[i] = original + static_cast<Scalar>(step);
    const double plus = evaluate(f, probe);
    probe[i] = original - static_cast<Scalar>(step);
    const double minus = evaluate(f, probe);
    probe[i] = original;

    const double numeric = (plus - minus) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_index = i;
    }
  }
  return result;
}

GradientCheck check_gradient(const ScalarFunction& f, const Tensor& input, double step) {
  std::vector<std::size_t> all(input.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return check_gradient(f, input, step, all);
}

}  // namespace texstat::ad
