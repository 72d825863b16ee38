// SPDX-License-Identifier: Apache-2.0
//
// texstat: dataset generation, training and evaluation from one binary.
//
// Exit codes: 0 success, 2 usage or configuration, 3 I/O, 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "texstat/checkpoint.hpp"
#include "texstat/config.hpp"
#include "texstat/dataset.hpp"
#include "texstat/error.hpp"
#include "texstat/eval.hpp"
#include "texstat/rng.hpp"
#include "texstat/spatial_stats.hpp"
#include "texstat/train.hpp"
#include "texstat/vae.hpp"

namespace fs = std::filesystem;
using namespace texstat;

namespace {

enum Exit : int { ok = 0, usage = 2, io_failure = 3, numeric_failure = 4 };

// Options every subcommand understands. Values given on the command line are
// layered over the config file, which is layered over the defaults.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> sets;
  KeyValues flags;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "master seed");
    app->add_option("--threads", threads, "worker threads (default: TEXSTAT_THREADS or all cores)");
    app->add_option("--set", sets, "extra key=value override, repeatable");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.apply(load_key_values(config_path));
    KeyValues extra;
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      extra.insert_or_assign(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.apply(extra);
    cfg.apply(flags);
    if (seed) cfg.seed = *seed;
    cfg.finalize();
    cfg.validate();
    return cfg;
  }
};

template <typename T>
void put(KeyValues& kv, const char* key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    kv.insert_or_assign(key, *v);
  } else {
    std::ostringstream os;
    os.precision(17);
    os << *v;
    kv.insert_or_assign(key, os.str());
  }
}

// Splits recorded by `train` travel inside the checkpoint so later commands
// evaluate on the same held-out images.
std::map<std::string, std::string> split_metadata(const RunConfig& cfg) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"run_seed", std::to_string(cfg.seed)},
          {"split_seed", std::to_string(cfg.split_seed())},
          {"split_train", num(cfg.split_fractions[0])},
          {"split_val", num(cfg.split_fractions[1])},
          {"split_test", num(cfg.split_fractions[2])}};
}

data::SplitIndices splits_for(const data::Dataset& ds, const RunConfig& cfg,
                              const vae::ModelParams* model) {
  std::uint64_t seed = cfg.split_seed();
  std::array<double, 3> fractions = cfg.split_fractions;
  if (model != nullptr) {
    const auto& md = model->metadata;
    if (auto it = md.find("split_seed"); it != md.end()) seed = std::stoull(it->second);
    const char* keys[3] = {"split_train", "split_val", "split_test"};
    for (int i = 0; i < 3; ++i) {
      if (auto it = md.find(keys[i]); it != md.end()) fractions[i] = std::stod(it->second);
    }
  }
  return data::split(ds, fractions, seed);
}

data::Dataset pick(const data::Dataset& ds, const data::SplitIndices& s, const std::string& which) {
  if (which == "train") return data::subset(ds, s.train);
  if (which == "val") return data::subset(ds, s.val);
  if (which == "test") return data::subset(ds, s.test);
  if (which == "all") return ds;
  throw ConfigError("unknown split '" + which + "' (train, val, test, all)");
}

void require_match(const vae::ModelParams& m, const data::Dataset& ds) {
  if (m.arch.height != ds.height || m.arch.width != ds.width) {
    throw ConfigError("model expects " + std::to_string(m.arch.height) + "x" +
                      std::to_string(m.arch.width) + " images, dataset has " +
                      std::to_string(ds.height) + "x" + std::to_string(ds.width));
  }
}

fs::path beside(const fs::path& file, const std::string& suffix) {
  return fs::path(file.string() + suffix);
}

// gen ------------------------------------------------------------------------

struct GenArgs {
  Common common;
  std::string out;
  std::optional<std::size_t> n, size;
};

int run_gen(GenArgs& a) {
  put(a.common.flags, "n_images", a.n);
  put(a.common.flags, "size", a.size);
  const RunConfig cfg = a.common.resolve();
  const unsigned threads = resolve_threads(a.common.threads);
  const data::Dataset ds = data::generate(cfg.dataset, threads);
  data::save(ds, a.out);
  cfg.write(beside(a.out, ".cfg"));
  std::printf("wrote %zu images (%zux%zu) to %s\n", ds.count(), ds.height, ds.width, a.out.c_str());
  return ok;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data, out;
  std::optional<std::string> loss, metric;
  std::optional<std::size_t> epochs, batch_size, checkpoint_every;
  std::optional<double> lr, alpha, beta;
  bool quiet = false;
};

int run_train(TrainArgs& a) {
  put(a.common.flags, "loss_mode", a.loss);
  put(a.common.flags, "metric", a.metric);
  put(a.common.flags, "epochs", a.epochs);
  put(a.common.flags, "batch_size", a.batch_size);
  put(a.common.flags, "checkpoint_every", a.checkpoint_every);
  put(a.common.flags, "learning_rate", a.lr);
  put(a.common.flags, "alpha", a.alpha);
  put(a.common.flags, "beta", a.beta);
  const data::Dataset ds = data::load(a.data);
  a.common.flags.insert_or_assign("height", std::to_string(ds.height));
  a.common.flags.insert_or_assign("width", std::to_string(ds.width));
  const RunConfig cfg = a.common.resolve();

  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.write(out / "resolved.cfg");

  const data::SplitIndices s = splits_for(ds, cfg, nullptr);
  const data::Dataset train_set = data::subset(ds, s.train);

  vae::TrainOptions opt;
  opt.threads = resolve_threads(a.common.threads);
  opt.checkpoint_dir = out / "checkpoints";
  opt.checkpoint_every = cfg.checkpoint_every;
  opt.metadata = split_metadata(cfg);
  const bool quiet = a.quiet;
  opt.on_epoch = [quiet](const vae::EpochRecord& r) {
    if (!quiet) {
      std::printf("epoch %4zu  total %.6e  recon %.6e  kl %.6e  %.1fs\n", r.epoch, r.total,
                  r.stats_term, r.kl_term, r.seconds);
      std::fflush(stdout);
    }
  };

  vae::TrainResult result = vae::train(train_set, cfg.arch, cfg.train, opt);
  vae::save_checkpoint(result.params, out / "model.tsvm");
  result.log.write_csv(out / "train_log.csv");
  if (!result.log.epochs.empty()) {
    std::printf("final_loss %.17g\n", result.log.epochs.back().total);
  }
  return ok;
}

// eval -----------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string model, data, out, split = "test";
  std::optional<std::size_t> n;
  std::optional<double> threshold;
  std::size_t figures = 8;
  bool identity = false;
};

int run_eval(EvalArgs& a) {
  put(a.common.flags, "eval_n", a.n);
  put(a.common.flags, "eval_threshold", a.threshold);
  if (a.identity != a.model.empty()) {
    throw ConfigError("eval needs exactly one of --model or --identity");
  }
  const data::Dataset ds = data::load(a.data);
  a.common.flags.insert_or_assign("height", std::to_string(ds.height));
  a.common.flags.insert_or_assign("width", std::to_string(ds.width));
  const RunConfig cfg = a.common.resolve();

  std::optional<vae::ModelParams> model;
  eval::Reconstructor recon = [](const Image& x) { return x; };
  if (!a.identity) {
    model = vae::load_checkpoint(a.model);
    require_match(*model, ds);
    recon = eval::model_reconstructor(*model);
  }
  const data::SplitIndices s = splits_for(ds, cfg, model ? &*model : nullptr);
  const data::Dataset target = pick(ds, s, a.split);
  const data::Dataset reference_set = data::subset(ds, s.train);

  std::vector<Image> ref_images;
  for (std::size_t i = 0; i < reference_set.count(); ++i) ref_images.push_back(reference_set.image(i));
  const eval::NearestSearch reference(std::move(ref_images), eval::Space::stats);

  eval::EvalOptions opt;
  opt.n = cfg.eval_n;
  opt.seed = cfg.eval_seed();
  opt.threshold = cfg.eval_threshold;
  opt.reference = reference_set.count() > 0 ? &reference : nullptr;
  const eval::EvalReport report = eval::evaluate_reconstructions(recon, target, opt);

  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.write(out / "resolved.cfg");
  report.write_summary_csv(out / "eval_summary.csv");
  report.write_pairs_csv(out / "eval_pairs.csv");

  std::vector<eval::FigureRow> rows;
  for (std::size_t i = 0; i < std::min(a.figures, report.pairs.size()); ++i) {
    const Image original = target.image(report.pairs[i].index);
    Image r = recon(original);
    rows.push_back({original, r, stats::autocorrelation(original), stats::autocorrelation(r)});
  }
  if (!rows.empty()) eval::export_figure_grid(rows, out / "figures");

  std::printf("pairs %zu  orientation(single line) %.4f  line count exact %.4f  within one %.4f\n",
              report.sample_count, report.orientation_accuracy_single_line,
              report.line_count_exact, report.line_count_within_one);
  std::printf("volume fraction diff %.4f%%  data mse %.6e  stats mse %.6e\n",
              report.mean_volume_fraction_diff_pct, report.mean_data_mse, report.mean_stats_mse);
  return ok;
}

// nearest --------------------------------------------------------------------

struct NearestArgs {
  Common common;
  std::string model, data, out, space = "stats", split = "all";
  std::size_t query = 0;
};

int run_nearest(NearestArgs& a) {
  const data::Dataset ds = data::load(a.data);
  a.common.flags.insert_or_assign("height", std::to_string(ds.height));
  a.common.flags.insert_or_assign("width", std::to_string(ds.width));
  const RunConfig cfg = a.common.resolve();
  const eval::Space space = eval::parse_space(a.space);

  std::optional<vae::ModelParams> model;
  if (!a.model.empty()) {
    model = vae::load_checkpoint(a.model);
    require_match(*model, ds);
  }
  const data::Dataset pool = pick(ds, splits_for(ds, cfg, model ? &*model : nullptr), a.split);
  if (a.query >= pool.count()) {
    throw ConfigError("--query " + std::to_string(a.query) + " out of range (" +
                      std::to_string(pool.count()) + " images)");
  }
  std::vector<Image> images;
  for (std::size_t i = 0; i < pool.count(); ++i) images.push_back(pool.image(i));
  const eval::NearestSearch search(std::move(images), space);

  std::string csv = "query_kind,query,neighbor,distance,space\n";
  auto add = [&](const char* kind, const eval::NearestResult& r) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.17g,%s\n", kind, a.query, r.neighbor, r.distance,
                  std::string(eval::to_string(space)).c_str());
    csv += line;
    std::fputs(line, stdout);
  };
  const Image original = pool.image(a.query);
  add("original", search.find(original));
  if (model) add("reconstruction", search.find(vae::reconstruct(*model, original, true)));

  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.write(out / "resolved.cfg");
  std::FILE* f = std::fopen((out / "nearest.csv").c_str(), "wb");
  if (f == nullptr) throw IoError("cannot write " + (out / "nearest.csv").string());
  std::fputs(csv.c_str(), f);
  if (std::fclose(f) != 0) throw IoError("cannot write " + (out / "nearest.csv").string());
  return ok;
}

// compare --------------------------------------------------------------------

struct CompareArgs {
  Common common;
  std::string stats_model, baseline, data, out, split = "test";
  std::optional<std::size_t> n;
};

int run_compare(CompareArgs& a) {
  put(a.common.flags, "eval_n", a.n);
  const data::Dataset ds = data::load(a.data);
  a.common.flags.insert_or_assign("height", std::to_string(ds.height));
  a.common.flags.insert_or_assign("width", std::to_string(ds.width));
  const RunConfig cfg = a.common.resolve();
  const vae::ModelParams sm = vae::load_checkpoint(a.stats_model);
  const vae::ModelParams bm = vae::load_checkpoint(a.baseline);
  require_match(sm, ds);
  require_match(bm, ds);
  const data::Dataset target = pick(ds, splits_for(ds, cfg, &sm), a.split);
  const eval::ComparisonTable table = eval::compare_models(sm, bm, target, cfg.eval_n, cfg.eval_seed());

  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.write(out / "resolved.cfg");
  table.write_csv(out / "comparison.csv");
  std::fputs(table.format().c_str(), stdout);
  return ok;
}

// overfit --------------------------------------------------------------------

struct OverfitArgs {
  Common common;
  std::string model, data, out;
  std::size_t n = 1000;
};

int run_overfit(OverfitArgs& a) {
  const data::Dataset ds = data::load(a.data);
  a.common.flags.insert_or_assign("height", std::to_string(ds.height));
  a.common.flags.insert_or_assign("width", std::to_string(ds.width));
  const RunConfig cfg = a.common.resolve();
  const vae::ModelParams model = vae::load_checkpoint(a.model);
  require_match(model, ds);
  const data::SplitIndices s = splits_for(ds, cfg, &model);
  const eval::OverfitReport report =
      eval::overfit_report(eval::model_reconstructor(model), data::subset(ds, s.train),
                           data::subset(ds, s.val), a.n, derive_seed(cfg.seed, "overfit"));

  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.write(out / "resolved.cfg");
  report.write(out);
  std::printf("ks_data %.6f  ks_stats %.6f\n", report.ks_data, report.ks_stats);
  return ok;
}

int exit_code_for(const FormatError& e) {
  return e.kind() == FormatError::Kind::incompatible ? usage : io_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"texstat: spatial-statistics autoencoders for binary line textures"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a line-texture dataset");
  gen.common.attach(gen_cmd);
  gen_cmd->add_option("--out,-o", gen.out, "output dataset file")->required();
  gen_cmd->add_option("--n", gen.n, "number of images");
  gen_cmd->add_option("--size", gen.size, "image height and width");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train an autoencoder");
  tr.common.attach(train_cmd);
  train_cmd->add_option("--data,-d", tr.data, "dataset file")->required();
  train_cmd->add_option("--out,-o", tr.out, "output directory")->required();
  train_cmd->add_option("--loss", tr.loss, "stats or data");
  train_cmd->add_option("--metric", tr.metric, "mse or l2_norm");
  train_cmd->add_option("--epochs", tr.epochs);
  train_cmd->add_option("--batch-size", tr.batch_size);
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--alpha", tr.alpha, "reconstruction weight");
  train_cmd->add_option("--beta", tr.beta, "KL weight");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every);
  train_cmd->add_flag("--quiet,-q", tr.quiet);

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score reconstructions of held-out images");
  ev.common.attach(eval_cmd);
  eval_cmd->add_option("--model,-m", ev.model, "checkpoint");
  eval_cmd->add_flag("--identity", ev.identity, "score the identity map instead of a model");
  eval_cmd->add_option("--data,-d", ev.data, "dataset file")->required();
  eval_cmd->add_option("--out,-o", ev.out, "output directory")->required();
  eval_cmd->add_option("--n", ev.n, "number of pairs");
  eval_cmd->add_option("--threshold", ev.threshold);
  eval_cmd->add_option("--split", ev.split, "train, val, test or all");
  eval_cmd->add_option("--figures", ev.figures, "rows in the figure grid");

  NearestArgs nn;
  CLI::App* nearest_cmd = app.add_subcommand("nearest", "nearest dataset image to a query");
  nn.common.attach(nearest_cmd);
  nearest_cmd->add_option("--model,-m", nn.model, "checkpoint; adds the reconstruction as a query");
  nearest_cmd->add_option("--data,-d", nn.data, "dataset file")->required();
  nearest_cmd->add_option("--out,-o", nn.out, "output directory")->required();
  nearest_cmd->add_option("--space", nn.space, "data or stats");
  nearest_cmd->add_option("--query", nn.query, "image index within the split");
  nearest_cmd->add_option("--split", nn.split, "train, val, test or all");

  CompareArgs cmp;
  CLI::App* compare_cmd = app.add_subcommand("compare", "compare a stats model with a baseline");
  cmp.common.attach(compare_cmd);
  compare_cmd->add_option("--stats-model", cmp.stats_model)->required();
  compare_cmd->add_option("--baseline", cmp.baseline)->required();
  compare_cmd->add_option("--data,-d", cmp.data, "dataset file")->required();
  compare_cmd->add_option("--out,-o", cmp.out, "output directory")->required();
  compare_cmd->add_option("--n", cmp.n, "number of pairs");
  compare_cmd->add_option("--split", cmp.split);

  OverfitArgs of;
  CLI::App* overfit_cmd = app.add_subcommand("overfit", "train/val reconstruction error distributions");
  of.common.attach(overfit_cmd);
  overfit_cmd->add_option("--model,-m", of.model, "checkpoint")->required();
  overfit_cmd->add_option("--data,-d", of.data, "dataset file")->required();
  overfit_cmd->add_option("--out,-o", of.out, "output directory")->required();
  overfit_cmd->add_option("--n", of.n, "images per split");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (nearest_cmd->parsed()) return run_nearest(nn);
    if (compare_cmd->parsed()) return run_compare(cmp);
    if (overfit_cmd->parsed()) return run_overfit(of);
  } catch (const vae::TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return numeric_failure;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return numeric_failure;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return usage;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return usage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return io_failure;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return io_failure;
  }
  return usage;
}
