// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Each op evaluates eagerly, records itself on
// the tape of its inputs and supplies a closed-form adjoint.
#pragma once

#include "texstat/autodiff.hpp"

namespace texstat::ad {

/// out = W * input + b, with input [n_in], W [n_out x n_in], b [n_out].
Var affine(Var input, Var weights, Var bias);

/// Cross-correlation convolution. input [C_in x H x W],
/// kernels [C_out x C_in x k x k] with k odd.
Var conv2d(Var input, Var kernels, int stride, int padding);

/// Adds bias[c] to every pixel of channel c of a [C x H x W] input.
Var add_channel_bias(Var input, Var bias);

/// Replicates each pixel of a [C x H x W] input into a factor x factor block.
Var upsample_nearest(Var input, int factor);

Var leaky_rectifier(Var input, Scalar slope);
Var sigmoid(Var input);
Var exp(Var input);
/// Square root with a zero subgradient at 0.
Var sqrt(Var input);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equally-shaped tensors.
Var mul(Var a, Var b);
Var mul_scalar(Var input, Scalar factor);

Var reduce_sum(Var input);
Var reduce_mean(Var input);

Var reshape(Var input, Shape shape);

}  // namespace texstat::ad
