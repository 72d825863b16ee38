// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "texstat/dataset.hpp"
#include "texstat/error.hpp"
#include "texstat/gradcheck.hpp"
#include "texstat/ops.hpp"
#include "texstat/spatial_stats.hpp"
#include "texstat/train.hpp"
#include "texstat/vae.hpp"

using namespace texstat;
using namespace texstat::vae;
using texstat::testing::random_image;
using texstat::testing::random_tensor;

namespace {

Architecture toy_arch() {
  Architecture a;
  a.height = a.width = 16;
  a.latent_dim = 3;
  a.encoder_channels = {2, 3};
  a.decoder_channels = {3, 2, 2};
  a.leaky_slope = 0.1;
  return a;
}

Image line_image(std::size_t size, std::uint64_t seed) {
  data::DatasetConfig c;
  c.height = c.width = size;
  c.n_images = 1;
  c.seed = seed;
  return data::generate(c).image(0);
}

// Total loss as a function of parameter tensor `k`, everything else fixed.
ad::ScalarFunction loss_wrt(const ModelParams& params, std::size_t k, const Image& x, const Tensor& eps,
                            const LossWeights& w) {
  return [&params, k, &x, &eps, w](ad::Tape& tape, ad::Var v) {
    BoundParams p = bind(tape, params, false);
    p.vars[k] = v;
    const EncoderOutput code = encode(p, params.arch, tape.constant(x.to_tensor()));
    const ad::Var z = reparameterize(code.mu, code.log_var, eps);
    return total_loss(x, decode(p, params.arch, z), code.mu, code.log_var, w).total;
  };
}

}  // namespace

TEST(Architecture, DefaultsAndValidation) {
  const Architecture a;
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.latent_dim, 9u);
  EXPECT_EQ(a.encoder_output_height(), 4u);
  EXPECT_EQ(a.seed_height(), 4u);
  Architecture bad = a;
  bad.height = 60;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = a;
  bad.decoder_channels = {8};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Params, LayoutAndInitDeterminism) {
  const Architecture a = toy_arch();
  const ModelParams p = init_params(a, 4);
  EXPECT_EQ(p.tensors.size(), parameter_layout(a).size());
  EXPECT_EQ(p, init_params(a, 4));
  EXPECT_NE(p.tensors[0].value, init_params(a, 5).tensors[0].value);
  EXPECT_EQ(p.tensors.front().name, "encoder.conv0.weight");
  EXPECT_EQ(p.tensors.back().name, "decoder.out.bias");
  EXPECT_NO_THROW(check_consistent(p));
  ModelParams broken = p;
  broken.tensors.pop_back();
  EXPECT_THROW(check_consistent(broken), ShapeError);
}

TEST(Encode, ZeroWeightsGiveBiases) {
  ModelParams p = init_params(toy_arch(), 1);
  for (NamedTensor& t : p.tensors) t.value.fill(0);
  for (NamedTensor& t : p.tensors) {
    if (t.name == "encoder.mu.bias") t.value = Tensor({3}, {0.5, -1, 2});
    if (t.name == "encoder.log_var.bias") t.value = Tensor({3}, {0.1, 0.2, 0.3});
  }
  const LatentCode code = encode(p, line_image(16, 2));
  EXPECT_EQ(code.mu, (std::vector<Scalar>{0.5, -1, 2}));
  EXPECT_EQ(code.log_var, (std::vector<Scalar>{0.1, 0.2, 0.3}));
}

TEST(Encode, DefaultLatentSizeAndDeterminism) {
  const ModelParams p = init_params(Architecture{}, 3);
  const Image x = line_image(64, 9);
  const LatentCode a = encode(p, x), b = encode(p, x);
  EXPECT_EQ(a.mu.size(), 9u);
  EXPECT_EQ(a.log_var.size(), 9u);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_THROW(encode(p, Image(32, 32)), ShapeError);
}

TEST(Reparameterize, Formula) {
  const LatentCode code{{1, 2}, {0, std::log(4.0)}};
  EXPECT_EQ(reparameterize(code, std::vector<Scalar>{0, 0}), code.mu);
  const std::vector<Scalar> z = reparameterize(code, std::vector<Scalar>{0.5, 0.5});
  EXPECT_DOUBLE_EQ(z[0], 1.5);
  EXPECT_DOUBLE_EQ(z[1], 3.0);
}

TEST(Reparameterize, GradientWrtMuIsIdentity) {
  Xoshiro256 rng(6);
  const Tensor lv = random_tensor(rng, {4}), eps = random_tensor(rng, {4});
  ad::Tape tape;
  ad::Var mu = tape.variable(random_tensor(rng, {4}));
  tape.backward(ad::reduce_sum(reparameterize(mu, tape.constant(lv), eps)));
  for (Scalar g : mu.grad().values()) EXPECT_EQ(g, 1.0);
  auto f = [&](ad::Tape& t, ad::Var m) { return ad::reduce_sum(reparameterize(m, t.constant(lv), eps)); };
  EXPECT_LT(ad::check_gradient(f, mu.value(), 1e-5).max_relative_error, 1e-4);
}

TEST(Decode, ShapeRangeDeterminism) {
  const ModelParams p = init_params(toy_arch(), 8);
  Xoshiro256 rng(1);
  for (int i = 0; i < 5; ++i) {
    std::vector<Scalar> z(3);
    for (Scalar& v : z) v = Scalar(3 * rng.normal());
    const Image a = decode(p, z);
    EXPECT_EQ(a.height(), 16u);
    EXPECT_EQ(a.width(), 16u);
    for (Scalar v : a.pixels()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
    EXPECT_EQ(decode(p, z), a);
  }
  EXPECT_THROW(decode(p, std::vector<Scalar>{1, 2}), ShapeError);
}

TEST(KlDivergence, Values) {
  EXPECT_EQ(kl_divergence(LatentCode{{0, 0, 0}, {0, 0, 0}}), 0.0);
  EXPECT_DOUBLE_EQ(kl_divergence(LatentCode{{1, 0, 0}, {0, 0, 0}}), 0.5);
  EXPECT_GT(kl_divergence(LatentCode{{0}, {1.5}}), 0.0);
}

TEST(KlDivergence, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Xoshiro256 rng(derive_seed(17, s));
    const Tensor mu = random_tensor(rng, {9}), lv = random_tensor(rng, {9});
    EXPECT_LT(ad::check_gradient([&](ad::Tape& t, ad::Var v) { return kl_divergence(v, t.constant(lv)); }, mu, 1e-5)
                  .max_relative_error, 1e-4);
    EXPECT_LT(ad::check_gradient([&](ad::Tape& t, ad::Var v) { return kl_divergence(t.constant(mu), v); }, lv, 1e-5)
                  .max_relative_error, 1e-4);
  }
}

TEST(TotalLoss, ZeroAtPerfectReconstructionAndAlphaZero) {
  const Image x = line_image(16, 3);
  for (LossMode mode : {LossMode::stats, LossMode::data}) {
    for (stats::Metric m : {stats::Metric::mse, stats::Metric::l2_norm}) {
      ad::Tape tape;
      const ad::Var mu = tape.constant(Tensor({3}, 0.0)), lv = tape.constant(Tensor({3}, 0.0));
      EXPECT_EQ(total_loss(x, tape.constant(x.to_tensor()), mu, lv, {1, 1, mode, m}).total.value().item(), 0.0);
      Xoshiro256 rng(4);
      const ad::Var mu2 = tape.constant(random_tensor(rng, {3})), lv2 = tape.constant(random_tensor(rng, {3}));
      const ad::Var noisy = tape.constant(random_image(rng, 16, 16, false).to_tensor());
      const LossTerms t = total_loss(x, noisy, mu2, lv2, {0, 0.7, mode, m});
      EXPECT_DOUBLE_EQ(t.total.value().item(), 0.7 * kl_divergence(mu2, lv2).value().item());
      EXPECT_GE(total_loss(x, noisy, mu2, lv2, {1, 1, mode, m}).total.value().item(), 0.0);
    }
  }
}

TEST(TotalLoss, DataModeIsPixelDistance) {
  const Image x = line_image(16, 5);
  Xoshiro256 rng(2);
  const Image y = random_image(rng, 16, 16, false);
  ad::Tape tape;
  const ad::Var mu = tape.constant(Tensor({3}, 0.0)), lv = tape.constant(Tensor({3}, 0.0));
  const double mse = total_loss(x, tape.constant(y.to_tensor()), mu, lv, {1, 1, LossMode::data, stats::Metric::mse})
                         .reconstruction.value().item();
  EXPECT_NEAR(mse, pixel_mse(x, y), 1e-15);
  const double st = total_loss(x, tape.constant(y.to_tensor()), mu, lv, {1, 1, LossMode::stats, stats::Metric::mse})
                        .reconstruction.value().item();
  EXPECT_NEAR(st, stats::stats_distance(stats::autocorrelation(x), stats::autocorrelation(y), stats::Metric::mse),
              1e-15);
}

TEST(FullGraph, GradientCheckOnToyModel) {
  const ModelParams params = init_params(toy_arch(), 21);
  const Image x = line_image(16, 22);
  Xoshiro256 rng(23);
  const Tensor eps = random_tensor(rng, {3});
  for (LossMode mode : {LossMode::stats, LossMode::data}) {
    const LossWeights w{1, 1, mode, stats::Metric::mse};
    for (std::size_t k = 0; k < params.tensors.size(); ++k) {
      const double err =
          ad::check_gradient(loss_wrt(params, k, x, eps, w), params.tensors[k].value, 1e-5).max_relative_error;
      EXPECT_LT(err, 1e-4) << params.tensors[k].name << " mode " << to_string(mode);
    }
  }
}

TEST(FullGraph, SampleGradientMatchesTapeAndSpotChecks) {
  const ModelParams params = init_params(toy_arch(), 31);
  const Image x = line_image(16, 32);
  Xoshiro256 rng(33);
  const Tensor eps = random_tensor(rng, {3});
  const LossWeights w{1, 1, LossMode::stats, stats::Metric::l2_norm};
  const SampleGradient sg = sample_gradient(params, x, eps, w);
  ASSERT_EQ(sg.grads.size(), params.tensors.size());
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    std::vector<std::size_t> coords;
    for (int i = 0; i < 5; ++i) coords.push_back(rng.uniform_int(0, params.tensors[k].value.size() - 1));
    // The tape-based check and sample_gradient must agree on these coordinates.
    const double err =
        ad::check_gradient(loss_wrt(params, k, x, eps, w), params.tensors[k].value, 1e-5, coords).max_relative_error;
    EXPECT_LT(err, 1e-3) << params.tensors[k].name;
    ad::Tape tape;
    ad::Var v = tape.variable(params.tensors[k].value);
    tape.backward(loss_wrt(params, k, x, eps, w)(tape, v));
    for (std::size_t c : coords) EXPECT_NEAR(sg.grads[k][c], v.grad()[c], 1e-12) << params.tensors[k].name;
  }
}

TEST(Reconstruct, DeterministicAndInRange) {
  const ModelParams p = init_params(toy_arch(), 4);
  const Image x = line_image(16, 4);
  const Image a = reconstruct(p, x);
  EXPECT_EQ(reconstruct(p, x), a);
  EXPECT_TRUE(a.same_shape(x));
  Xoshiro256 rng(1);
  const Image s = reconstruct(p, x, false, &rng);
  EXPECT_NE(s, a);
  for (Scalar v : s.pixels()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(LossMode, Parse) {
  EXPECT_EQ(parse_loss_mode("stats"), LossMode::stats);
  EXPECT_EQ(parse_loss_mode("data"), LossMode::data);
  EXPECT_THROW(parse_loss_mode("pixels"), ConfigError);
}
