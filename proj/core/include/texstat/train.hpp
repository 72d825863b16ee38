// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "texstat/dataset.hpp"
#include "texstat/error.hpp"
#include "texstat/vae.hpp"

namespace texstat::vae {

struct TrainConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  LossMode loss_mode = LossMode::stats;
  stats::Metric metric = stats::Metric::mse;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  LossWeights weights() const { return {alpha, beta, loss_mode, metric}; }
};

/// Adaptive moment estimation with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon);

  /// Updates `params` in place from gradients laid out like params.tensors.
  void step(ModelParams& params, const std::vector<Tensor>& grads);
  std::uint64_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// One row per completed epoch. In data mode `stats_term` holds the
/// pixel-space reconstruction term.
struct EpochRecord {
  std::size_t epoch = 0;
  double total = 0;
  double stats_term = 0;
  double kl_term = 0;
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  TrainConfig config;
  std::string dataset_fingerprint;

  /// Header: epoch,total,stats_term,kl_term,seconds
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainOptions {
  /// Worker threads for the per-sample fan-out inside a batch. Results are
  /// identical for any value because gradients are reduced in sample order.
  unsigned threads = 1;
  /// Where checkpoints go; empty disables checkpointing.
  std::filesystem::path checkpoint_dir;
  /// Write epoch_NNNN.tsvm every this many epochs (0: only latest.tsvm).
  std::size_t checkpoint_every = 0;
  /// Extra key/value pairs stored in every checkpoint next to the config.
  std::map<std::string, std::string> metadata;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

/// Raised when a batch produces a non-finite loss or gradient. The last
/// parameters from a completed epoch are carried along (and written to
/// last_good.tsvm when checkpointing is enabled).
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, ModelParams last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const ModelParams& last_good() const noexcept { return last_good_; }

 private:
  ModelParams last_good_;
};

/// FNV-1a over the serialized dataset, as 16 hex digits.
std::string fingerprint(const data::Dataset& dataset);

struct SampleGradient {
  std::vector<Tensor> grads;
  double total = 0;
  double reconstruction = 0;
  double kl = 0;
};

/// Loss and parameter gradients for one image and one epsilon draw.
SampleGradient sample_gradient(const ModelParams& params, const Image& image,
                               const Tensor& epsilon, const LossWeights& weights);

TrainResult train(const data::Dataset& train_set, const Architecture& arch,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Continues from existing parameters (architecture taken from `initial`).
TrainResult train(const data::Dataset& train_set, ModelParams initial, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace texstat::vae
