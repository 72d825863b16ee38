// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction quality protocols: binarisation, volume-fraction difference,
// line counting, nearest-neighbour retrieval in pixel or statistics space,
// the overfit distribution check and the two-model comparison.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "texstat/dataset.hpp"
#include "texstat/image.hpp"
#include "texstat/spatial_stats.hpp"
#include "texstat/vae.hpp"

namespace texstat::eval {

using Reconstructor = std::function<Image(const Image&)>;

/// Deterministic reconstruction (z = mu) through `params`.
Reconstructor model_reconstructor(const vae::ModelParams& params);

/// 0 where pixel < t, 1 otherwise. Requires t in (0, 1).
Image threshold(const Image& image, double t = 0.05);

/// Rounds half away from zero to `decimals` places.
double round_half_away(double value, int decimals);

/// |orig - recon| / orig * 100 over line pixels (value 1), rounded to four
/// decimals. Throws ConfigError when the original has no line pixels.
double volume_fraction_diff(const Image& original, const Image& recon_thresholded);

enum class LineOrientation { horizontal, vertical, ambiguous };

std::string_view to_string(LineOrientation o);
LineOrientation from_ground_truth(data::Orientation o);

struct LineCount {
  std::size_t count = 0;
  std::vector<LineOrientation> orientations;
};

/// 4-connected components of the line phase; each component is one line,
/// oriented by its bounding box (square boxes are ambiguous).
LineCount count_lines(const Image& binary);

enum class Space { data, stats };

std::string_view to_string(Space s);
Space parse_space(std::string_view name);

struct NearestResult {
  std::size_t query = 0;
  std::size_t neighbor = 0;
  double distance = 0;
  Space space = Space::data;
};

/// Exhaustive MSE search over a fixed set of images. In stats space the
/// autocorrelation maps of the set are computed once up front.
class NearestSearch {
 public:
  NearestSearch(std::vector<Image> images, Space space);

  /// Closest member to `query`; ties go to the lowest index.
  NearestResult find(const Image& query) const;
  /// Closest member to member `index`, excluding `index` itself.
  NearestResult find_member(std::size_t index) const;

  std::size_t size() const noexcept { return images_.size(); }
  const Image& image(std::size_t index) const { return images_.at(index); }
  Space space() const noexcept { return space_; }

 private:
  NearestResult scan(const std::vector<Scalar>& probe, std::optional<std::size_t> exclude) const;
  std::vector<Scalar> represent(const Image& image) const;

  std::vector<Image> images_;
  Space space_;
  std::vector<std::vector<Scalar>> features_;
};

/// One-shot convenience wrapper around NearestSearch.
NearestResult nearest_in_dataset(const Image& query, const std::vector<Image>& dataset, Space space);

/// Seeded choice of `n` distinct indices out of `population`.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed);

struct PairMetrics {
  std::size_t index = 0;
  std::size_t truth_count = 0;
  std::size_t recon_count = 0;
  std::string truth_orientations;
  std::string recon_orientations;
  bool orientation_correct = false;
  bool orientation_multiset_correct = false;
  double per_line_agreement = 0;
  bool count_exact = false;
  bool count_within_one = false;
  double volume_fraction_diff_pct = 0;
  double data_mse = 0;
  double stats_mse = 0;
  /// Line count of the closest reference image in statistics space, when a
  /// reference set was supplied.
  std::optional<std::size_t> nearest_count;
};

struct EvalReport {
  /// Whole-image match of the set of distinct orientations.
  double orientation_accuracy = 0;
  double orientation_accuracy_single_line = 0;
  double orientation_multiset_accuracy = 0;
  double per_line_orientation_agreement = 0;
  double line_count_exact = 0;
  double line_count_within_one = 0;
  double nearest_line_count_exact = 0;
  double mean_volume_fraction_diff_pct = 0;
  double mean_data_mse = 0;
  double mean_stats_mse = 0;
  std::size_t sample_count = 0;
  std::size_t single_line_count = 0;
  std::vector<PairMetrics> pairs;

  /// One header row and one value row.
  void write_summary_csv(const std::filesystem::path& path) const;
  void write_pairs_csv(const std::filesystem::path& path) const;
};

struct EvalOptions {
  std::size_t n = 100;
  std::uint64_t seed = 0;
  double threshold = 0.05;
  /// Set searched for the statistics-space nearest neighbour of each
  /// original; may be null.
  const NearestSearch* reference = nullptr;
};

EvalReport evaluate_reconstructions(const Reconstructor& model, const data::Dataset& test_set,
                                    const EvalOptions& options = {});

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct OverfitSplit {
  std::vector<std::size_t> indices;
  std::vector<double> data_scores;
  std::vector<double> stats_scores;
  double data_mean = 0, data_std = 0;
  double stats_mean = 0, stats_std = 0;
};

struct OverfitReport {
  OverfitSplit train;
  OverfitSplit val;
  double ks_data = 0;
  double ks_stats = 0;

  /// Writes overfit_train.csv, overfit_val.csv and overfit_summary.csv.
  void write(const std::filesystem::path& dir) const;
};

/// Each of `n` reconstructions per split is scored by its mean MSE against
/// every image of its own split, in pixel space and in statistics space.
OverfitReport overfit_report(const Reconstructor& model, const data::Dataset& train_set,
                             const data::Dataset& val_set, std::size_t n, std::uint64_t seed);

struct ComparisonRow {
  std::string name;
  std::string loss_mode;
  double mean_data_mse = 0;
  double mean_stats_mse = 0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;
  /// Baseline stats-space MSE over the statistics model's.
  double stats_mse_ratio = 0;
  std::size_t sample_count = 0;

  void write_csv(const std::filesystem::path& path) const;
  std::string format() const;
};

ComparisonTable compare_models(const vae::ModelParams& stats_model,
                               const vae::ModelParams& baseline_model,
                               const data::Dataset& test_set, std::size_t n, std::uint64_t seed);

struct FigureRow {
  Image original;
  Image reconstruction;
  stats::StatsMap stats_original;
  stats::StatsMap stats_reconstruction;
};

/// Writes four PGMs per row (images inverted so lines are black; statistics
/// fftshifted and min-max normalised) plus manifest.csv listing them.
/// Returns the manifest path.
std::filesystem::path export_figure_grid(const std::vector<FigureRow>& rows,
                                         const std::filesystem::path& dir);

}  // namespace texstat::eval
