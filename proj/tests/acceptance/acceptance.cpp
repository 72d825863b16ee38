// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
// report file under the work directory (argv[1], default ./acceptance_work).
// Criteria 5, 6 and 8 train full desk-scale models and take most of an hour on
// one core. Set TEXSTAT_ACCEPTANCE_REUSE=1 to reuse models from a previous run
// in the same work directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "texstat/autodiff.hpp"
#include "texstat/checkpoint.hpp"
#include "texstat/config.hpp"
#include "texstat/dataset.hpp"
#include "texstat/eval.hpp"
#include "texstat/gradcheck.hpp"
#include "texstat/image.hpp"
#include "texstat/ops.hpp"
#include "texstat/rng.hpp"
#include "texstat/spatial_stats.hpp"
#include "texstat/train.hpp"
#include "texstat/vae.hpp"

#ifndef TEXSTAT_CLI_PATH
#error "TEXSTAT_CLI_PATH must point at the texstat executable"
#endif

namespace fs = std::filesystem;
using namespace texstat;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and gates, fixed here so nobody tunes them per run.
constexpr double kOracleTol = 1e-10;
constexpr double kOracleSeconds = 5.0;
constexpr double kZeroLagTol = 1e-12;
constexpr double kSymmetryTol = 1e-12;
constexpr double kShiftTol = 1e-10;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr std::size_t kGradTrials = 10;
constexpr double kTrainHours = 2.0;
constexpr std::size_t kHeldOutPairs = 100;
constexpr double kOrientationMin = 0.80;
constexpr double kWithinOneMin = 0.70;
constexpr std::size_t kOverfitPerSplit = 200;
constexpr std::size_t kOverfitImages = 50;
constexpr std::size_t kOverfitEpochs = 50;
constexpr double kFinalLossTol = 1e-6;
constexpr double kStatsTermDrop = 0.5;
constexpr double kTrainedVsUntrained = 10.0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  int id;
  std::string title;
  bool pass;
  std::vector<std::string> details;
};

std::vector<Outcome> g_outcomes;
std::ofstream g_report;
bool g_oracles_ok = true;

void emit(int id, const std::string& title, bool pass, std::vector<std::string> details) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", title.c_str());
  g_report << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << title << "\n";
  for (const std::string& d : details) {
    std::printf("    %s\n", d.c_str());
    g_report << "    " << d << "\n";
  }
  std::fflush(stdout);
  g_report.flush();
  g_outcomes.push_back({id, title, pass, std::move(details)});
}

// Training-level checks that sit beside the numbered criteria. They count
// towards the exit status but get their own line.
void oracle(const std::string& title, bool pass, const std::string& detail) {
  std::printf("oracle: %s  %s\n    %s\n", pass ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  g_report << "oracle: " << (pass ? "PASS" : "FAIL") << "  " << title << "\n    " << detail << "\n";
  std::fflush(stdout);
  g_report.flush();
  g_oracles_ok = g_oracles_ok && pass;
}

Image random_image(Xoshiro256& rng, std::size_t h, std::size_t w, bool binary) {
  Image img(h, w);
  for (Scalar& p : img.pixels()) p = binary ? Scalar(rng.uniform01() < 0.4) : Scalar(rng.uniform01());
  return img;
}

double max_abs_diff(const stats::StatsMap& a, const stats::StatsMap& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.values()[i] - b.values()[i])));
  return m;
}

// 1 --------------------------------------------------------------------------

void criterion_oracle() {
  Xoshiro256 rng(derive_seed(1, "oracle"));
  const auto t0 = Clock::now();
  double worst = 0;
  for (int kind = 0; kind < 2; ++kind) {
    for (int i = 0; i < 20; ++i) {
      const std::size_t h = 4 + rng.uniform_int(0, 12);
      const std::size_t w = 4 + rng.uniform_int(0, 12);
      const Image img = random_image(rng, h, w, kind == 0);
      worst = std::max(worst, max_abs_diff(stats::autocorrelation(img), stats::brute_force_autocorr(img)));
    }
  }
  const double secs = seconds_since(t0);
  emit(1, "FFT autocorrelation equals the periodic brute-force sum",
       worst < kOracleTol && secs < kOracleSeconds,
       {fmt("40 images (20 binary, 20 continuous), sizes 4..16 per side"),
        fmt("max |fft - brute| = %.3e (limit %.0e)", worst, kOracleTol),
        fmt("runtime %.3f s (limit %.1f s)", secs, kOracleSeconds)});
}

// 2 --------------------------------------------------------------------------

void criterion_zero_lag(const data::Dataset& ds) {
  double worst = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Image img = ds.image(i);
    double vf = 0;
    for (Scalar p : img.pixels()) vf += p;
    vf /= double(img.size());
    worst = std::max(worst, std::abs(double(stats::autocorrelation(img).zero_lag()) - vf));
  }
  emit(2, "zero-lag autocorrelation equals volume fraction", worst < kZeroLagTol,
       {fmt("100 generated images, max |S(0,0) - vf| = %.3e (limit %.0e)", worst, kZeroLagTol)});
}

// 3 --------------------------------------------------------------------------

void criterion_symmetry(const data::Dataset& ds) {
  Xoshiro256 rng(derive_seed(3, "symmetry"));
  double sym = 0, shift = 0;
  for (int i = 0; i < 20; ++i) {
    const Image img = i % 2 == 0 ? ds.image(rng.uniform_int(0, ds.count() - 1))
                                 : random_image(rng, 16 + rng.uniform_int(0, 16), 16 + rng.uniform_int(0, 16), false);
    const stats::StatsMap s = stats::autocorrelation(img);
    const long h = long(s.height()), w = long(s.width());
    for (long dy = 0; dy < h; ++dy) {
      for (long dx = 0; dx < w; ++dx) sym = std::max(sym, std::abs(double(s.at(dy, dx) - s.at(-dy, -dx))));
    }
    const long a = long(rng.uniform_int(0, std::uint64_t(h) - 1)) - h / 2;
    const long b = long(rng.uniform_int(0, std::uint64_t(w) - 1)) - w / 2;
    shift = std::max(shift, max_abs_diff(stats::autocorrelation(roll(img, a, b)), s));
  }
  emit(3, "centrosymmetry and translation invariance", sym < kSymmetryTol && shift < kShiftTol,
       {fmt("max |S(r) - S(-r)| = %.3e (limit %.0e)", sym, kSymmetryTol),
        fmt("20 random rolls, max |S(roll x) - S(x)| = %.3e (limit %.0e)", shift, kShiftTol)});
}

// 4 --------------------------------------------------------------------------

Tensor random_tensor(Xoshiro256& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (Scalar& v : t.values()) v = Scalar(lo + (hi - lo) * rng.uniform01());
  return t;
}

// Values bounded away from zero, for ops with a kink or a singularity there.
Tensor away_from_zero(Xoshiro256& rng, Shape shape, double lo, double hi) {
  Tensor t = random_tensor(rng, std::move(shape), lo, hi);
  for (Scalar& v : t.values()) v = rng.uniform01() < 0.5 ? -v : v;
  return t;
}

// Contracts an arbitrary output with fixed random weights so every output
// element gets a distinct adjoint.
ad::Var contract(ad::Tape& tape, ad::Var y, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  return ad::reduce_sum(ad::mul(y, tape.constant(random_tensor(rng, y.shape(), -1, 1))));
}

void criterion_gradients() {
  struct Case {
    std::string name;
    std::function<double(std::uint64_t)> run;  // worst relative error for one seed
  };
  auto check = [](const ad::ScalarFunction& f, const Tensor& x) {
    return ad::check_gradient(f, x, kGradStep).max_relative_error;
  };
  std::vector<Case> cases;

  for (stats::Metric metric : {stats::Metric::mse, stats::Metric::l2_norm}) {
    cases.push_back({"stats_loss/" + std::string(stats::to_string(metric)), [=](std::uint64_t s) {
                       Xoshiro256 rng(s);
                       const Image x = random_image(rng, 16, 16, true);
                       const Tensor xh = random_tensor(rng, {1, 16, 16}, 0.05, 0.95);
                       return check([&](ad::Tape&, ad::Var v) { return stats::stats_loss(x, v, metric); }, xh);
                     }});
  }
  cases.push_back({"conv2d/input", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor k = random_tensor(rng, {3, 2, 3, 3}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::conv2d(v, t.constant(k), 2, 1), s);
                     }, random_tensor(rng, {2, 7, 6}, -1, 1));
                   }});
  cases.push_back({"conv2d/kernels", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor x = random_tensor(rng, {2, 6, 6}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::conv2d(t.constant(x), v, 1, 1), s);
                     }, random_tensor(rng, {3, 2, 3, 3}, -1, 1));
                   }});
  cases.push_back({"affine/input", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor w = random_tensor(rng, {4, 6}, -1, 1), b = random_tensor(rng, {4}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::affine(v, t.constant(w), t.constant(b)), s);
                     }, random_tensor(rng, {6}, -1, 1));
                   }});
  cases.push_back({"affine/weights", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor x = random_tensor(rng, {6}, -1, 1), b = random_tensor(rng, {4}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::affine(t.constant(x), v, t.constant(b)), s);
                     }, random_tensor(rng, {4, 6}, -1, 1));
                   }});
  cases.push_back({"affine/bias", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor x = random_tensor(rng, {6}, -1, 1), w = random_tensor(rng, {4, 6}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::affine(t.constant(x), t.constant(w), v), s);
                     }, random_tensor(rng, {4}, -1, 1));
                   }});
  cases.push_back({"add_channel_bias", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor x = random_tensor(rng, {3, 4, 5}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       return contract(t, ad::add_channel_bias(t.constant(x), v), s);
                     }, random_tensor(rng, {3}, -1, 1));
                   }});
  cases.push_back({"upsample_nearest", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) { return contract(t, ad::upsample_nearest(v, 2), s); },
                                  random_tensor(rng, {2, 3, 4}, -1, 1));
                   }});
  cases.push_back({"leaky_rectifier", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) { return contract(t, ad::leaky_rectifier(v, 0.01), s); },
                                  away_from_zero(rng, {2, 4, 4}, 0.01, 1));
                   }});
  cases.push_back({"sigmoid", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) { return contract(t, ad::sigmoid(v), s); },
                                  random_tensor(rng, {2, 4, 4}, -4, 4));
                   }});
  cases.push_back({"exp", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) { return contract(t, ad::exp(v), s); },
                                  random_tensor(rng, {9}, -2, 2));
                   }});
  cases.push_back({"sqrt", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) { return contract(t, ad::sqrt(v), s); },
                                  random_tensor(rng, {9}, 0.1, 2));
                   }});
  cases.push_back({"add/sub/mul shared operand", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     const Tensor c = random_tensor(rng, {3, 3}, -1, 1);
                     return check([&](ad::Tape& t, ad::Var v) {
                       const ad::Var k = t.constant(c);
                       return contract(t, ad::sub(ad::mul(v, v), ad::add(v, ad::mul(k, v))), s);
                     }, random_tensor(rng, {3, 3}, -1, 1));
                   }});
  cases.push_back({"mul_scalar/reduce_mean/reshape", [=](std::uint64_t s) {
                     Xoshiro256 rng(s);
                     return check([&](ad::Tape& t, ad::Var v) {
                       const ad::Var r = ad::reshape(ad::mul_scalar(v, 1.7), {12});
                       return ad::add(contract(t, r, s), ad::reduce_mean(ad::mul(v, v)));
                     }, random_tensor(rng, {3, 4}, -1, 1));
                   }});
  for (int which = 0; which < 2; ++which) {
    cases.push_back({which == 0 ? "kl_divergence/mu" : "kl_divergence/log_var", [=](std::uint64_t s) {
                       Xoshiro256 rng(s);
                       const Tensor other = random_tensor(rng, {9}, -1, 1);
                       return check([&](ad::Tape& t, ad::Var v) {
                         return which == 0 ? vae::kl_divergence(v, t.constant(other))
                                           : vae::kl_divergence(t.constant(other), v);
                       }, random_tensor(rng, {9}, -1, 1));
                     }});
  }

  bool pass = true;
  std::vector<std::string> details;
  for (const Case& c : cases) {
    double worst = 0;
    for (std::size_t trial = 0; trial < kGradTrials; ++trial) {
      worst = std::max(worst, c.run(derive_seed(derive_seed(4, c.name), trial)));
    }
    pass = pass && worst < kGradRelTol;
    details.push_back(fmt("%-32s worst rel err %.3e over %zu seeds", c.name.c_str(), worst, kGradTrials));
  }
  details.push_back(fmt("gate: rel err < %.0e, central differences with h = %.0e", kGradRelTol, kGradStep));
  emit(4, "analytic gradients match finite differences", pass, std::move(details));
}

// 5, 6, 8 ---------------------------------------------------------------------

struct Trained {
  vae::ModelParams params;
  double seconds = 0;
  bool reused = false;
  std::vector<double> stats_terms;  // per epoch, from the training log
};

std::vector<double> log_column(const fs::path& csv, std::size_t column) {
  std::ifstream in(csv);
  std::string line;
  std::vector<double> out;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t start = 0;
    for (std::size_t c = 0; c < column; ++c) start = line.find(',', start) + 1;
    out.push_back(std::stod(line.substr(start, line.find(',', start) - start)));
  }
  return out;
}

Trained train_or_reuse(const fs::path& dir, const std::string& name, const data::Dataset& train_set,
                       const vae::Architecture& arch, const vae::TrainConfig& config, unsigned threads) {
  const fs::path ckpt = dir / (name + ".tsvm");
  const char* reuse = std::getenv("TEXSTAT_ACCEPTANCE_REUSE");
  if (reuse != nullptr && std::string(reuse) == "1" && fs::exists(ckpt)) {
    vae::ModelParams p = vae::load_checkpoint(ckpt, arch);
    if (p.metadata["dataset_fingerprint"] == vae::fingerprint(train_set) &&
        p.metadata["loss_mode"] == vae::to_string(config.loss_mode) &&
        p.metadata["epochs"] == std::to_string(config.epochs)) {
      std::printf("  reusing %s\n", ckpt.c_str());
      return {std::move(p), 0, true, log_column(dir / (name + "_log.csv"), 2)};
    }
  }
  std::printf("  training %s: %zu images, %zu epochs, loss %s\n", name.c_str(), train_set.count(),
              config.epochs, std::string(vae::to_string(config.loss_mode)).c_str());
  std::fflush(stdout);
  vae::TrainOptions opt;
  opt.threads = threads;
  opt.on_epoch = [&](const vae::EpochRecord& r) {
    if (r.epoch == 1 || r.epoch % 10 == 0) {
      std::printf("    epoch %3zu  total %.6e  recon %.6e  kl %.6e  %.1fs\n", r.epoch, r.total,
                  r.stats_term, r.kl_term, r.seconds);
      std::fflush(stdout);
    }
  };
  const auto t0 = Clock::now();
  vae::TrainResult result = vae::train(train_set, arch, config, opt);
  const double secs = seconds_since(t0);
  vae::save_checkpoint(result.params, ckpt);
  result.log.write_csv(dir / (name + "_log.csv"));
  return {std::move(result.params), secs, false, log_column(dir / (name + "_log.csv"), 2)};
}

std::vector<Image> images_of(const data::Dataset& ds) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < ds.count(); ++i) out.push_back(ds.image(i));
  return out;
}

// 7 --------------------------------------------------------------------------

void criterion_threshold_and_volume_fraction() {
  Xoshiro256 rng(derive_seed(7, "threshold"));
  bool idempotent = true;
  for (int i = 0; i < 20; ++i) {
    const Image x = random_image(rng, 16, 16, false);
    const Image once = eval::threshold(x, 0.05);
    idempotent = idempotent && eval::threshold(once, 0.05).pixels() == once.pixels();
  }
  Image edge(2, 2, Scalar(0.05));
  edge.at(0, 0) = Scalar(0.0499);
  const Image te = eval::threshold(edge, 0.05);
  const bool at_t = te.at(0, 1) == 1 && te.at(1, 0) == 1 && te.at(1, 1) == 1 && te.at(0, 0) == 0;

  Image a(20, 20);
  for (std::size_t i = 0; i < 100; ++i) a.pixels()[i] = 1;
  Image b(20, 20);
  for (std::size_t i = 0; i < 83; ++i) b.pixels()[i] = 1;
  const double same = eval::volume_fraction_diff(a, a);
  const double worked = eval::volume_fraction_diff(a, b);
  emit(7, "threshold and volume-fraction difference are exact",
       idempotent && at_t && same == 0.0 && worked == 17.0,
       {fmt("threshold idempotent on 20 random images: %s", idempotent ? "yes" : "no"),
        fmt("pixel equal to t maps to 1: %s", at_t ? "yes" : "no"),
        fmt("volume_fraction_diff(a, a) = %.4f", same),
        fmt("100 vs 83 line pixels -> %.4f (expected 17.0000)", worked)});
}

// 9 --------------------------------------------------------------------------

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double last_total(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  const auto a = last.find(',');
  const auto b = last.find(',', a + 1);
  return std::stod(last.substr(a + 1, b - a - 1));
}

void criterion_determinism(const fs::path& work, const vae::ModelParams& model, const data::Dataset& test) {
  const std::string cli = TEXSTAT_CLI_PATH;
  const fs::path d = work / "determinism";
  fs::remove_all(d);
  fs::create_directories(d);
  const std::string gen = cli + " gen --n 64 --size 32 --seed 11 --out ";
  const int g1 = run(gen + (d / "a.ltds").string());
  const int g2 = run(gen + (d / "b.ltds").string());
  const bool gen_same = g1 == 0 && g2 == 0 && slurp(d / "a.ltds") == slurp(d / "b.ltds") &&
                        !slurp(d / "a.ltds").empty();

  const std::string tr = cli + " train --threads 1 --epochs 2 --batch-size 8 --seed 5 -q --data " +
                         (d / "a.ltds").string() + " --out ";
  const int t1 = run(tr + (d / "run1").string());
  const int t2 = run(tr + (d / "run2").string());
  double l1 = NAN, l2 = NAN;
  if (t1 == 0 && t2 == 0) {
    l1 = last_total(d / "run1" / "train_log.csv");
    l2 = last_total(d / "run2" / "train_log.csv");
  }
  const bool train_same = std::abs(l1 - l2) <= kFinalLossTol;

  vae::save_checkpoint(model, d / "roundtrip.tsvm");
  const vae::ModelParams back = vae::load_checkpoint(d / "roundtrip.tsvm");
  bool recon_same = back == model;
  for (std::size_t i = 0; i < 10 && i < test.count(); ++i) {
    const Image x = test.image(i);
    recon_same = recon_same && vae::reconstruct(model, x).pixels() == vae::reconstruct(back, x).pixels();
  }
  emit(9, "generation, training and checkpoints are reproducible", gen_same && train_same && recon_same,
       {fmt("gen twice with seed 11: exit %d/%d, byte-identical %s", g1, g2, gen_same ? "yes" : "no"),
        fmt("train --threads 1 twice: exit %d/%d, final loss %.17g vs %.17g (|diff| limit %.0e)", t1, t2,
            l1, l2, kFinalLossTol),
        fmt("checkpoint round trip: identical parameters and 10 reconstructions %s",
            recon_same ? "yes" : "no")});
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(work);
  g_report.open(work / "acceptance_report.txt");
  const unsigned threads = resolve_threads(std::nullopt);
  std::printf("acceptance run, %u thread(s), work dir %s\n", threads, work.c_str());

  // Pinned desk-scale configuration: library defaults with seed 0.
  RunConfig cfg;
  cfg.finalize();
  cfg.validate();
  const data::Dataset ds = data::generate(cfg.dataset, threads);
  const data::SplitIndices splits = data::split(ds, cfg.split_fractions, cfg.split_seed());
  const data::Dataset train_set = data::subset(ds, splits.train);
  const data::Dataset val_set = data::subset(ds, splits.val);
  const data::Dataset test_set = data::subset(ds, splits.test);

  criterion_oracle();
  criterion_zero_lag(ds);
  criterion_symmetry(ds);
  criterion_gradients();

  // 5
  vae::TrainConfig stats_cfg = cfg.train;
  stats_cfg.loss_mode = vae::LossMode::stats;
  vae::TrainConfig data_cfg = cfg.train;
  data_cfg.loss_mode = vae::LossMode::data;
  const Trained stats_model = train_or_reuse(work, "stats_model", train_set, cfg.arch, stats_cfg, threads);
  const Trained baseline = train_or_reuse(work, "baseline_model", train_set, cfg.arch, data_cfg, threads);
  const eval::ComparisonTable table =
      eval::compare_models(stats_model.params, baseline.params, test_set, kHeldOutPairs, cfg.eval_seed());
  table.write_csv(work / "comparison.csv");
  const auto& sr = table.rows[0];
  const auto& br = table.rows[1];
  const double train_hours = (stats_model.seconds + baseline.seconds) / 3600.0;
  const bool stats_closer = sr.mean_stats_mse < br.mean_stats_mse;
  const bool baseline_closer = br.mean_data_mse < sr.mean_data_mse;
  emit(5, "stats model is closer in statistics space, baseline closer in data space",
       stats_closer && baseline_closer && train_hours < kTrainHours && table.warnings.empty(),
       {fmt("n=%zu %zux%zu lines %zu..%zu, d=%zu alpha=%g beta=%g lr=%g batch %zu, %zu epochs, seed %llu",
            cfg.dataset.n_images, cfg.dataset.height, cfg.dataset.width, cfg.dataset.lines_min,
            cfg.dataset.lines_max, cfg.arch.latent_dim, cfg.train.alpha, cfg.train.beta,
            cfg.train.learning_rate, cfg.train.batch_size, cfg.train.epochs,
            static_cast<unsigned long long>(cfg.seed)),
        fmt("stats model: stats-MSE %.6e  data-MSE %.6e", sr.mean_stats_mse, sr.mean_data_mse),
        fmt("baseline:    stats-MSE %.6e  data-MSE %.6e", br.mean_stats_mse, br.mean_data_mse),
        fmt("stats-MSE stats < baseline: %s; data-MSE baseline < stats: %s", stats_closer ? "yes" : "no",
            baseline_closer ? "yes" : "no"),
        fmt("%zu held-out pairs; training %.2f h (limit %.1f h)%s", table.sample_count, train_hours,
            kTrainHours, stats_model.reused || baseline.reused ? ", reused checkpoint(s)" : ""),
        table.warnings.empty() ? std::string("configs identical apart from loss_mode")
                               : "warning: " + table.warnings.front()});

  if (stats_model.stats_terms.empty()) {
    oracle("stats term falls by half over training", false, "training log missing");
  } else {
    const double first = stats_model.stats_terms.front(), last = stats_model.stats_terms.back();
    oracle("stats term falls by half over training", last <= (1.0 - kStatsTermDrop) * first,
           fmt("epoch 1 %.6e, epoch %zu %.6e, ratio %.3e (max %.2f)", first, stats_model.stats_terms.size(),
               last, last / first, 1.0 - kStatsTermDrop));
  }
  {
    const vae::ModelParams untrained = vae::init_params(cfg.arch, stats_cfg.seed);
    const eval::ComparisonTable before =
        eval::compare_models(untrained, untrained, test_set, kHeldOutPairs, cfg.eval_seed());
    const double mse_before = before.rows[0].mean_stats_mse;
    oracle("trained stats-MSE at least ten times below the untrained model's",
           sr.mean_stats_mse * kTrainedVsUntrained <= mse_before,
           fmt("untrained %.6e, trained %.6e, factor %.1f (min %.0f)", mse_before, sr.mean_stats_mse,
               mse_before / sr.mean_stats_mse, kTrainedVsUntrained));
  }

  // 6
  const eval::NearestSearch reference(images_of(train_set), eval::Space::stats);
  eval::EvalOptions eopt;
  eopt.n = kHeldOutPairs;
  eopt.seed = cfg.eval_seed();
  eopt.threshold = cfg.eval_threshold;
  eopt.reference = &reference;
  const eval::EvalReport report =
      eval::evaluate_reconstructions(eval::model_reconstructor(stats_model.params), test_set, eopt);
  report.write_summary_csv(work / "eval_summary.csv");
  report.write_pairs_csv(work / "eval_pairs.csv");
  std::vector<double> vfs;
  for (const auto& p : report.pairs) vfs.push_back(p.volume_fraction_diff_pct);
  std::sort(vfs.begin(), vfs.end());
  auto q = [&](double f) { return vfs.empty() ? 0.0 : vfs[std::size_t(f * double(vfs.size() - 1))]; };
  emit(6, "held-out reconstruction metrics of the stats model",
       report.orientation_accuracy_single_line >= kOrientationMin && report.line_count_within_one >= kWithinOneMin,
       {fmt("%zu pairs, %zu with a single line", report.sample_count, report.single_line_count),
        fmt("orientation accuracy, single-line originals %.4f (min %.2f)", report.orientation_accuracy_single_line,
            kOrientationMin),
        fmt("orientation accuracy, all originals %.4f", report.orientation_accuracy),
        fmt("line count exact %.4f, within one %.4f (min %.2f)", report.line_count_exact,
            report.line_count_within_one, kWithinOneMin),
        fmt("nearest training image in stats space has the same line count: %.4f", report.nearest_line_count_exact),
        fmt("volume fraction diff %%: mean %.4f, median %.4f, p10 %.4f, p90 %.4f", report.mean_volume_fraction_diff_pct,
            q(0.5), q(0.1), q(0.9))});

  // 7
  criterion_threshold_and_volume_fraction();

  // 8
  const eval::OverfitReport acc_report =
      eval::overfit_report(eval::model_reconstructor(stats_model.params), train_set, val_set, kOverfitPerSplit,
                           derive_seed(cfg.seed, "overfit"));
  acc_report.write(work / "overfit_acceptance");
  std::vector<std::size_t> first(kOverfitImages);
  for (std::size_t i = 0; i < kOverfitImages; ++i) first[i] = i;
  const data::Dataset tiny = data::subset(train_set, first);
  vae::TrainConfig of_cfg = stats_cfg;
  of_cfg.epochs = kOverfitEpochs;
  const Trained overfit = train_or_reuse(work, "overfit_model", tiny, cfg.arch, of_cfg, threads);
  const eval::OverfitReport of_report =
      eval::overfit_report(eval::model_reconstructor(overfit.params), tiny, val_set, kOverfitImages,
                           derive_seed(cfg.seed, "overfit"));
  of_report.write(work / "overfit_small");
  const eval::OverfitReport acc_matched =
      eval::overfit_report(eval::model_reconstructor(stats_model.params), train_set, val_set, kOverfitImages,
                           derive_seed(cfg.seed, "overfit"));
  const bool ks_pass = of_report.ks_data > acc_report.ks_data && of_report.ks_stats > acc_report.ks_stats;
  emit(8, "overfit diagnostic separates an overfit model from the acceptance model", ks_pass,
       {fmt("acceptance model, %zu per split: KS data %.4f, KS stats %.4f", kOverfitPerSplit, acc_report.ks_data,
            acc_report.ks_stats),
        fmt("  train mean data-MSE %.6e, val %.6e; stats-MSE %.6e vs %.6e", acc_report.train.data_mean,
            acc_report.val.data_mean, acc_report.train.stats_mean, acc_report.val.stats_mean),
        fmt("overfit model (%zu images, %zu epochs), %zu per split: KS data %.4f, KS stats %.4f", kOverfitImages,
            kOverfitEpochs, kOverfitImages, of_report.ks_data, of_report.ks_stats),
        fmt("  train mean data-MSE %.6e, val %.6e; stats-MSE %.6e vs %.6e", of_report.train.data_mean,
            of_report.val.data_mean, of_report.train.stats_mean, of_report.val.stats_mean),
        fmt("acceptance model at matched size (%zu per split), for reference: KS data %.4f, KS stats %.4f",
            kOverfitImages, acc_matched.ks_data, acc_matched.ks_stats),
        "gate: overfit KS exceeds acceptance KS in both data and stats space"});

  // 9
  criterion_determinism(work, stats_model.params, test_set);

  std::sort(g_outcomes.begin(), g_outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::size_t passed = 0;
  std::printf("\nsummary\n");
  for (const Outcome& o : g_outcomes) {
    passed += o.pass;
    std::printf("criterion %d: %s\n", o.id, o.pass ? "PASS" : "FAIL");
  }
  std::printf("%zu/%zu criteria passed, training oracles %s\n", passed, g_outcomes.size(),
              g_oracles_ok ? "passed" : "FAILED");
  return passed == g_outcomes.size() && g_oracles_ok ? 0 : 1;
}
