// SPDX-License-Identifier: Apache-2.0
//
// Convolutional VAE. The encoder is a stack of stride-2 3x3 convolutions
// with leaky rectifiers followed by two affine heads (mu, log_var). The
// decoder maps z through an affine layer onto a small grid, then repeats
// nearest upsampling x2 + 3x3 convolution + leaky rectifier, and finishes
// with a 3x3 convolution to one channel and a sigmoid.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "texstat/autodiff.hpp"
#include "texstat/image.hpp"
#include "texstat/rng.hpp"
#include "texstat/spatial_stats.hpp"

namespace texstat::vae {

struct Architecture {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t latent_dim = 9;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 128};
  /// First entry is the channel count of the decoder's seed grid; each
  /// further entry is the output width of one upsampling stage.
  std::vector<std::size_t> decoder_channels{64, 32, 16, 8, 4};
  double leaky_slope = 0.01;

  void validate() const;
  std::size_t encoder_output_height() const;
  std::size_t encoder_output_width() const;
  std::size_t decoder_stages() const { return decoder_channels.size() - 1; }
  std::size_t seed_height() const { return height >> decoder_stages(); }
  std::size_t seed_width() const { return width >> decoder_stages(); }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct ModelParams {
  Architecture arch;
  std::uint64_t seed = 0;
  /// Declaration order is fixed by the architecture; see parameter_layout().
  std::vector<NamedTensor> tensors;
  /// Free-form provenance recorded by training (resolved config values).
  std::map<std::string, std::string> metadata;

  const Tensor& get(std::string_view name) const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct LatentCode {
  std::vector<Scalar> mu;
  std::vector<Scalar> log_var;
};

/// Names and shapes of every parameter tensor, in declaration order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const Architecture& arch);

/// Uniform fan-in scaled initialisation, deterministic in `seed`.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

/// Throws ShapeError unless `params` matches parameter_layout(params.arch).
void check_consistent(const ModelParams& params);

/// Parameters bound onto a tape, same order as ModelParams::tensors.
struct BoundParams {
  std::vector<ad::Var> vars;
};

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable);

struct EncoderOutput {
  ad::Var mu;
  ad::Var log_var;
};

/// `image` is [1 x H x W].
EncoderOutput encode(const BoundParams& p, const Architecture& arch, ad::Var image);
/// z = mu + exp(log_var / 2) * epsilon; epsilon is a constant.
ad::Var reparameterize(ad::Var mu, ad::Var log_var, const Tensor& epsilon);
/// Returns [1 x H x W] in (0, 1).
ad::Var decode(const BoundParams& p, const Architecture& arch, ad::Var z);
/// 0.5 * sum(mu^2 + exp(log_var) - log_var - 1).
ad::Var kl_divergence(ad::Var mu, ad::Var log_var);

enum class LossMode { stats, data };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view name);

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  LossMode mode = LossMode::stats;
  stats::Metric metric = stats::Metric::mse;
};

struct LossTerms {
  ad::Var total;
  ad::Var reconstruction;
  ad::Var kl;
};

/// alpha * distance(x, x_hat) + beta * KL, where distance is taken between
/// autocorrelation maps (stats mode) or raw pixels (data mode).
LossTerms total_loss(const Image& x, ad::Var x_hat, ad::Var mu, ad::Var log_var,
                     const LossWeights& weights);

// Convenience wrappers that evaluate without recording gradients.
LatentCode encode(const ModelParams& params, const Image& image);
Image decode(const ModelParams& params, std::span<const Scalar> z);
std::vector<Scalar> reparameterize(const LatentCode& code, std::span<const Scalar> epsilon);
double kl_divergence(const LatentCode& code);

/// decode(mu) when deterministic, otherwise decode of a sample drawn from
/// `rng` (which must then be non-null).
Image reconstruct(const ModelParams& params, const Image& image, bool deterministic = true,
                  Xoshiro256* rng = nullptr);

}  // namespace texstat::vae
