// SPDX-License-Identifier: Apache-2.0
#include "texstat/train.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "binary_io.hpp"
#include "texstat/checkpoint.hpp"
#include "texstat/error.hpp"

namespace texstat::vae {

void TrainConfig::validate() const {
  if (!(alpha >= 0) || !(beta >= 0)) throw ConfigError("alpha and beta must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw ConfigError("adam epsilon must be > 0");
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void AdamOptimizer::step(ModelParams& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.tensors.size()) throw ShapeError("adam: gradient count mismatch");
  if (m_.empty()) {
    for (const NamedTensor& t : params.tensors) {
      m_.emplace_back(t.value.shape());
      v_.emplace_back(t.value.shape());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    Tensor& p = params.tensors[k].value;
    const Tensor& g = grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = beta1_ * m[i] + (1.0 - beta1_) * gi;
      const double vi = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      m[i] = static_cast<Scalar>(mi);
      v[i] = static_cast<Scalar>(vi);
      p[i] -= static_cast<Scalar>(lr_ * (mi / c1) / (std::sqrt(vi / c2) + eps_));
    }
  }
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::string out = "epoch,total,stats_term,kl_term,seconds\n";
  char line[256];
  for (const EpochRecord& e : epochs) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.3f\n", e.epoch, e.total,
                  e.stats_term, e.kl_term, e.seconds);
    out += line;
  }
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

std::string fingerprint(const data::Dataset& dataset) {
  const std::vector<std::uint8_t> bytes = data::serialize(dataset);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SampleGradient sample_gradient(const ModelParams& params, const Image& image,
                               const Tensor& epsilon, const LossWeights& weights) {
  ad::Tape tape;
  const BoundParams p = bind(tape, params, true);
  const EncoderOutput code = encode(p, params.arch, tape.constant(image.to_tensor()));
  ad::Var z = reparameterize(code.mu, code.log_var, epsilon);
  ad::Var x_hat = decode(p, params.arch, z);
  const LossTerms terms = total_loss(image, x_hat, code.mu, code.log_var, weights);
  tape.backward(terms.total);

  SampleGradient out;
  out.total = terms.total.value().item();
  out.reconstruction = terms.reconstruction.value().item();
  out.kl = terms.kl.value().item();
  out.grads.reserve(p.vars.size());
  for (const ad::Var& v : p.vars) out.grads.push_back(v.grad());
  return out;
}

namespace {

std::map<std::string, std::string> describe(const TrainConfig& c, const std::string& fp) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"alpha", num(c.alpha)},
          {"beta", num(c.beta)},
          {"learning_rate", num(c.learning_rate)},
          {"batch_size", std::to_string(c.batch_size)},
          {"epochs", std::to_string(c.epochs)},
          {"loss_mode", std::string(to_string(c.loss_mode))},
          {"metric", std::string(stats::to_string(c.metric))},
          {"seed", std::to_string(c.seed)},
          {"adam_beta1", num(c.adam_beta1)},
          {"adam_beta2", num(c.adam_beta2)},
          {"adam_epsilon", num(c.adam_epsilon)},
          {"optimizer", "adam"},
          {"dataset_fingerprint", fp}};
}

bool all_finite(const SampleGradient& s) {
  if (!std::isfinite(s.total)) return false;
  for (const Tensor& g : s.grads) {
    if (!g.all_finite()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const data::Dataset& train_set, ModelParams initial, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  check_consistent(initial);
  if (train_set.count() == 0) throw ConfigError("train: training split is empty");
  if (train_set.height != initial.arch.height || train_set.width != initial.arch.width) {
    throw ShapeError("train: dataset images do not match the architecture input size");
  }

  TrainResult result{std::move(initial), {}};
  result.log.config = config;
  result.log.dataset_fingerprint = fingerprint(train_set);
  result.params.metadata = describe(config, result.log.dataset_fingerprint);
  for (const auto& [k, v] : options.metadata) result.params.metadata.insert_or_assign(k, v);

  ModelParams& params = result.params;
  AdamOptimizer adam(config.learning_rate, config.adam_beta1, config.adam_beta2,
                     config.adam_epsilon);
  Xoshiro256 shuffle_rng(derive_seed(config.seed, "shuffle"));
  Xoshiro256 epsilon_rng(derive_seed(config.seed, "epsilon"));
  const LossWeights weights = config.weights();
  const std::size_t n = train_set.count();
  const std::size_t d = params.arch.latent_dim;

  std::vector<Image> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) images.push_back(train_set.image(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  ModelParams last_good = params;

  auto write = [&](const ModelParams& p, const std::string& name) {
    if (!options.checkpoint_dir.empty()) save_checkpoint(p, options.checkpoint_dir / name);
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.uniform_int(0, i - 1)]);

    double sum_total = 0, sum_recon = 0, sum_kl = 0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, n - begin);
      std::vector<Tensor> eps(b, Tensor(Shape{d}));
      for (Tensor& e : eps) {
        for (Scalar& v : e.values()) v = static_cast<Scalar>(epsilon_rng.normal());
      }

      std::vector<SampleGradient> samples(b);
      auto run = [&](std::size_t worker, std::size_t stride) {
        for (std::size_t s = worker; s < b; s += stride) {
          samples[s] = sample_gradient(params, images[order[begin + s]], eps[s], weights);
        }
      };
      const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, b);
      try {
        if (workers == 1) {
          run(0, 1);
        } else {
          std::vector<std::exception_ptr> errors(workers);
          {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
              pool.emplace_back([&, w] {
                try {
                  run(w, workers);
                } catch (...) {
                  errors[w] = std::current_exception();
                }
              });
            }
          }
          for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
          }
        }
      } catch (const NumericError& e) {
        write(last_good, "last_good.tsvm");
        throw TrainingDiverged("non-finite value in epoch " + std::to_string(epoch) + ": " + e.what(),
                               last_good);
      }

      std::vector<Tensor> grads;
      for (const NamedTensor& t : params.tensors) grads.emplace_back(t.value.shape());
      double batch_total = 0, batch_recon = 0, batch_kl = 0;
      for (const SampleGradient& s : samples) {
        if (!all_finite(s)) {
          write(last_good, "last_good.tsvm");
          throw TrainingDiverged("non-finite loss or gradient in epoch " + std::to_string(epoch),
                                 last_good);
        }
        for (std::size_t k = 0; k < grads.size(); ++k) {
          Scalar* dst = grads[k].data();
          const Scalar* src = s.grads[k].data();
          for (std::size_t i = 0; i < grads[k].size(); ++i) dst[i] += src[i];
        }
        batch_total += s.total;
        batch_recon += s.reconstruction;
        batch_kl += s.kl;
      }
      const auto inv_b = static_cast<Scalar>(1.0 / static_cast<double>(b));
      for (Tensor& g : grads) {
        for (Scalar& v : g.values()) v *= inv_b;
      }
      adam.step(params, grads);
      sum_total += batch_total;
      sum_recon += batch_recon;
      sum_kl += batch_kl;
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto dn = static_cast<double>(n);
    EpochRecord rec{epoch, sum_total / dn, sum_recon / dn, sum_kl / dn, seconds};
    result.log.epochs.push_back(rec);
    last_good = params;

    write(params, "latest.tsvm");
    if (options.checkpoint_every > 0 && epoch % options.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu.tsvm", epoch);
      write(params, name);
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

TrainResult train(const data::Dataset& train_set, const Architecture& arch,
                  const TrainConfig& config, const TrainOptions& options) {
  return train(train_set, init_params(arch, config.seed), config, options);
}

}  // namespace texstat::vae
