// SPDX-License-Identifier: Apache-2.0
#include "texstat/vae.hpp"

#include <cmath>
#include <string>

#include "texstat/error.hpp"
#include "texstat/ops.hpp"

namespace texstat::vae {
namespace {

constexpr int kKernel = 3;

std::size_t halve_up(std::size_t n) { return (n + 1) / 2; }

// Cursor over bound parameters in declaration order.
class ParamCursor {
 public:
  explicit ParamCursor(const BoundParams& p) : p_(p) {}
  ad::Var next() { return p_.vars.at(i_++); }
  void skip(std::size_t n) { i_ += n; }

 private:
  const BoundParams& p_;
  std::size_t i_ = 0;
};

std::size_t encoder_param_count(const Architecture& arch) {
  return 2 * arch.encoder_channels.size() + 4;
}

}  // namespace

void Architecture::validate() const {
  if (height < 1 || width < 1) throw ConfigError("architecture: image size must be positive");
  if (latent_dim < 1) throw ConfigError("architecture: latent_dim must be >= 1");
  if (encoder_channels.empty()) throw ConfigError("architecture: need at least one encoder stage");
  if (decoder_channels.size() < 2) throw ConfigError("architecture: need at least one decoder stage");
  for (std::size_t c : encoder_channels) {
    if (c < 1) throw ConfigError("architecture: channel counts must be positive");
  }
  for (std::size_t c : decoder_channels) {
    if (c < 1) throw ConfigError("architecture: channel counts must be positive");
  }
  if (decoder_stages() >= 31) throw ConfigError("architecture: too many decoder stages");
  const std::size_t scale = std::size_t{1} << decoder_stages();
  if (height % scale != 0 || width % scale != 0) {
    throw ConfigError("architecture: image size must be divisible by 2^(decoder stages)");
  }
  if (!(leaky_slope >= 0 && leaky_slope < 1)) throw ConfigError("architecture: leaky_slope in [0, 1)");
}

std::size_t Architecture::encoder_output_height() const {
  std::size_t h = height;
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) h = halve_up(h);
  return h;
}

std::size_t Architecture::encoder_output_width() const {
  std::size_t w = width;
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) w = halve_up(w);
  return w;
}

const Tensor& ModelParams::get(std::string_view name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& t : tensors) n += t.value.size();
  return n;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const Architecture& arch) {
  arch.validate();
  std::vector<std::pair<std::string, Shape>> out;
  const auto k = static_cast<std::size_t>(kKernel);
  std::size_t in = 1;
  for (std::size_t i = 0; i < arch.encoder_channels.size(); ++i) {
    const std::size_t c = arch.encoder_channels[i];
    out.emplace_back("encoder.conv" + std::to_string(i) + ".weight", Shape{c, in, k, k});
    out.emplace_back("encoder.conv" + std::to_string(i) + ".bias", Shape{c});
    in = c;
  }
  const std::size_t features =
      in * arch.encoder_output_height() * arch.encoder_output_width();
  out.emplace_back("encoder.mu.weight", Shape{arch.latent_dim, features});
  out.emplace_back("encoder.mu.bias", Shape{arch.latent_dim});
  out.emplace_back("encoder.log_var.weight", Shape{arch.latent_dim, features});
  out.emplace_back("encoder.log_var.bias", Shape{arch.latent_dim});

  const std::size_t seed_size = arch.decoder_channels[0] * arch.seed_height() * arch.seed_width();
  out.emplace_back("decoder.fc.weight", Shape{seed_size, arch.latent_dim});
  out.emplace_back("decoder.fc.bias", Shape{seed_size});
  for (std::size_t i = 0; i < arch.decoder_stages(); ++i) {
    const std::size_t ci = arch.decoder_channels[i], co = arch.decoder_channels[i + 1];
    out.emplace_back("decoder.conv" + std::to_string(i) + ".weight", Shape{co, ci, k, k});
    out.emplace_back("decoder.conv" + std::to_string(i) + ".bias", Shape{co});
  }
  out.emplace_back("decoder.out.weight", Shape{1, arch.decoder_channels.back(), k, k});
  out.emplace_back("decoder.out.bias", Shape{1});
  return out;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams params{arch, seed, {}, {}};
  Xoshiro256 rng(derive_seed(seed, "init"));
  const auto layout = parameter_layout(arch);
  // Weights and their biases share the fan-in of the weight that precedes them.
  double bound = 0;
  for (const auto& [name, shape] : layout) {
    if (shape.size() >= 2) {
      const double fan_in = static_cast<double>(element_count(shape) / shape[0]);
      bound = 1.0 / std::sqrt(fan_in);
    }
    Tensor t(shape);
    for (Scalar& v : t.values()) v = static_cast<Scalar>((2.0 * rng.uniform01() - 1.0) * bound);
    params.tensors.push_back({name, std::move(t)});
  }
  return params;
}

void check_consistent(const ModelParams& params) {
  const auto layout = parameter_layout(params.arch);
  if (layout.size() != params.tensors.size()) {
    throw ShapeError("model parameters: expected " + std::to_string(layout.size()) +
                     " tensors, found " + std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != params.tensors[i].name ||
        layout[i].second != params.tensors[i].value.shape()) {
      throw ShapeError("model parameters: tensor " + std::to_string(i) + " is " +
                       params.tensors[i].name + texstat::to_string(params.tensors[i].value.shape()) +
                       ", expected " + layout[i].first + texstat::to_string(layout[i].second));
    }
  }
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  BoundParams out;
  out.vars.reserve(params.tensors.size());
  for (const NamedTensor& t : params.tensors) {
    out.vars.push_back(trainable ? tape.variable(t.value) : tape.constant(t.value));
  }
  return out;
}

EncoderOutput encode(const BoundParams& p, const Architecture& arch, ad::Var image) {
  if (image.shape() != Shape{1, arch.height, arch.width}) {
    throw ShapeError("encode: image " + texstat::to_string(image.shape()) + " does not match architecture " +
                     std::to_string(arch.height) + "x" + std::to_string(arch.width));
  }
  ParamCursor cur(p);
  const auto slope = static_cast<Scalar>(arch.leaky_slope);
  ad::Var h = image;
  for (std::size_t i = 0; i < arch.encoder_channels.size(); ++i) {
    ad::Var w = cur.next();
    ad::Var b = cur.next();
    h = ad::leaky_rectifier(ad::add_channel_bias(ad::conv2d(h, w, 2, kKernel / 2), b), slope);
  }
  ad::Var flat = ad::reshape(h, Shape{h.value().size()});
  ad::Var mu_w = cur.next(), mu_b = cur.next();
  ad::Var lv_w = cur.next(), lv_b = cur.next();
  return {ad::affine(flat, mu_w, mu_b), ad::affine(flat, lv_w, lv_b)};
}

ad::Var reparameterize(ad::Var mu, ad::Var log_var, const Tensor& epsilon) {
  if (epsilon.size() != mu.value().size()) throw ShapeError("reparameterize: epsilon size mismatch");
  ad::Var eps = mu.tape().constant(epsilon.reshaped(mu.shape()));
  ad::Var std_dev = ad::exp(ad::mul_scalar(log_var, Scalar(0.5)));
  return ad::add(mu, ad::mul(std_dev, eps));
}

ad::Var decode(const BoundParams& p, const Architecture& arch, ad::Var z) {
  if (z.value().size() != arch.latent_dim) {
    throw ShapeError("decode: latent of size " + std::to_string(z.value().size()) + ", expected " +
                     std::to_string(arch.latent_dim));
  }
  ParamCursor cur(p);
  cur.skip(encoder_param_count(arch));
  const auto slope = static_cast<Scalar>(arch.leaky_slope);
  ad::Var fc_w = cur.next(), fc_b = cur.next();
  ad::Var h = ad::affine(ad::reshape(z, Shape{arch.latent_dim}), fc_w, fc_b);
  h = ad::reshape(h, Shape{arch.decoder_channels[0], arch.seed_height(), arch.seed_width()});
  for (std::size_t i = 0; i < arch.decoder_stages(); ++i) {
    ad::Var w = cur.next();
    ad::Var b = cur.next();
    h = ad::upsample_nearest(h, 2);
    h = ad::leaky_rectifier(ad::add_channel_bias(ad::conv2d(h, w, 1, kKernel / 2), b), slope);
  }
  ad::Var w = cur.next(), b = cur.next();
  return ad::sigmoid(ad::add_channel_bias(ad::conv2d(h, w, 1, kKernel / 2), b));
}

ad::Var kl_divergence(ad::Var mu, ad::Var log_var) {
  if (mu.value().size() != log_var.value().size()) throw ShapeError("kl_divergence: size mismatch");
  const Tensor& m = mu.value();
  const Tensor& lv = log_var.value();
  double sum = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    sum += static_cast<double>(m[i]) * m[i] + std::exp(static_cast<double>(lv[i])) - lv[i] - 1.0;
  }
  return mu.tape().record(
      "kl_divergence", Tensor::scalar(static_cast<Scalar>(0.5 * sum)), {mu, log_var},
      [mu, log_var](ad::Tape& tape, const Tensor& g) {
        if (Tensor* dm = tape.adjoint_slot(mu)) {
          for (std::size_t i = 0; i < dm->size(); ++i) (*dm)[i] += g[0] * mu.value()[i];
        }
        if (Tensor* dl = tape.adjoint_slot(log_var)) {
          for (std::size_t i = 0; i < dl->size(); ++i) {
            (*dl)[i] += g[0] * Scalar(0.5) * (std::exp(log_var.value()[i]) - Scalar(1));
          }
        }
      });
}

std::string_view to_string(LossMode mode) { return mode == LossMode::stats ? "stats" : "data"; }

LossMode parse_loss_mode(std::string_view name) {
  if (name == "stats") return LossMode::stats;
  if (name == "data") return LossMode::data;
  throw ConfigError("unknown loss mode '" + std::string(name) + "' (expected stats or data)");
}

LossTerms total_loss(const Image& x, ad::Var x_hat, ad::Var mu, ad::Var log_var,
                     const LossWeights& weights) {
  if (x_hat.value().size() != x.size()) throw ShapeError("total_loss: reconstruction size mismatch");
  ad::Tape& tape = x_hat.tape();
  ad::Var recon;
  if (weights.mode == LossMode::stats) {
    recon = stats::stats_loss(x, x_hat, weights.metric);
  } else {
    ad::Var target = tape.constant(x.to_tensor().reshaped(x_hat.shape()));
    ad::Var diff = ad::sub(x_hat, target);
    ad::Var sq = ad::mul(diff, diff);
    recon = weights.metric == stats::Metric::mse ? ad::reduce_mean(sq) : ad::sqrt(ad::reduce_sum(sq));
  }
  ad::Var kl = kl_divergence(mu, log_var);
  ad::Var total = ad::add(ad::mul_scalar(recon, static_cast<Scalar>(weights.alpha)),
                          ad::mul_scalar(kl, static_cast<Scalar>(weights.beta)));
  return {total, recon, kl};
}

LatentCode encode(const ModelParams& params, const Image& image) {
  ad::Tape tape;
  const BoundParams p = bind(tape, params, false);
  const EncoderOutput out = encode(p, params.arch, tape.constant(image.to_tensor()));
  const auto& mu = out.mu.value().values();
  const auto& lv = out.log_var.value().values();
  return {{mu.begin(), mu.end()}, {lv.begin(), lv.end()}};
}

Image decode(const ModelParams& params, std::span<const Scalar> z) {
  ad::Tape tape;
  const BoundParams p = bind(tape, params, false);
  ad::Var zv = tape.constant(Tensor(Shape{z.size()}, {z.begin(), z.end()}));
  return Image::from_tensor(decode(p, params.arch, zv).value());
}

std::vector<Scalar> reparameterize(const LatentCode& code, std::span<const Scalar> epsilon) {
  if (code.mu.size() != code.log_var.size() || epsilon.size() != code.mu.size()) {
    throw ShapeError("reparameterize: size mismatch");
  }
  std::vector<Scalar> z(code.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = code.mu[i] + std::exp(Scalar(0.5) * code.log_var[i]) * epsilon[i];
  }
  return z;
}

double kl_divergence(const LatentCode& code) {
  if (code.mu.size() != code.log_var.size()) throw ShapeError("kl_divergence: size mismatch");
  double sum = 0;
  for (std::size_t i = 0; i < code.mu.size(); ++i) {
    const double m = code.mu[i], lv = code.log_var[i];
    sum += m * m + std::exp(lv) - lv - 1.0;
  }
  return 0.5 * sum;
}

Image reconstruct(const ModelParams& params, const Image& image, bool deterministic,
                  Xoshiro256* rng) {
  ad::Tape tape;
  const BoundParams p = bind(tape, params, false);
  const EncoderOutput code = encode(p, params.arch, tape.constant(image.to_tensor()));
  ad::Var z = code.mu;
  if (!deterministic) {
    if (rng == nullptr) throw ConfigError("reconstruct: sampling mode needs a random stream");
    Tensor eps(Shape{params.arch.latent_dim});
    for (Scalar& v : eps.values()) v = static_cast<Scalar>(rng->normal());
    z = reparameterize(code.mu, code.log_var, eps);
  }
  return Image::from_tensor(decode(p, params.arch, z).value());
}

}  // namespace texstat::vae
