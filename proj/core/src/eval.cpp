// SPDX-License-Identifier: Apache-2.0
#include "texstat/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "binary_io.hpp"
#include "texstat/error.hpp"
#include "texstat/rng.hpp"

namespace texstat::eval {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string join(const std::vector<LineOrientation>& os) {
  std::string out;
  for (LineOrientation o : os) {
    if (!out.empty()) out += ";";
    out += to_string(o);
  }
  return out;
}

std::size_t count_line_pixels(const Image& image) {
  return static_cast<std::size_t>(
      std::count_if(image.pixels().begin(), image.pixels().end(), [](Scalar v) { return v > 0.5; }));
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = v.empty() ? 0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(acc / static_cast<double>(v.size() - 1)) : 0.0;
}

// Per-position first and second moments of a set of equally sized vectors;
// mean_j mean_p (r_p - x_jp)^2 = mean_p (r_p^2 - 2 r_p m1_p + m2_p).
struct Moments {
  std::vector<double> first, second;

  explicit Moments(const std::vector<std::vector<Scalar>>& rows) {
    const std::size_t p = rows.front().size();
    first.assign(p, 0.0);
    second.assign(p, 0.0);
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < p; ++i) {
        first[i] += row[i];
        second[i] += static_cast<double>(row[i]) * row[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < p; ++i) {
      first[i] *= inv;
      second[i] *= inv;
    }
  }

  double mean_mse(const std::vector<Scalar>& r) const {
    double acc = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double x = r[i];
      acc += x * x - 2.0 * x * first[i] + second[i];
    }
    return std::max(0.0, acc / static_cast<double>(r.size()));
  }
};

OverfitSplit score_split(const Reconstructor& model, const data::Dataset& split, std::size_t n,
                         std::uint64_t seed) {
  std::vector<std::vector<Scalar>> pixels, maps;
  pixels.reserve(split.count());
  maps.reserve(split.count());
  for (std::size_t i = 0; i < split.count(); ++i) {
    const Image img = split.image(i);
    maps.push_back(stats::autocorrelation(img).values());
    pixels.push_back(img.pixels());
  }
  const Moments pixel_moments(pixels);
  const Moments map_moments(maps);

  OverfitSplit out;
  out.indices = sample_indices(split.count(), n, seed);
  for (std::size_t idx : out.indices) {
    const Image recon = model(split.image(idx));
    out.data_scores.push_back(pixel_moments.mean_mse(recon.pixels()));
    out.stats_scores.push_back(map_moments.mean_mse(stats::autocorrelation(recon).values()));
  }
  mean_std(out.data_scores, out.data_mean, out.data_std);
  mean_std(out.stats_scores, out.stats_mean, out.stats_std);
  return out;
}

void write_split_csv(const OverfitSplit& s, const std::filesystem::path& path) {
  std::string text = "sample,dataset_index,data_score,stats_score\n";
  for (std::size_t i = 0; i < s.indices.size(); ++i) {
    text += std::to_string(i) + "," + std::to_string(s.indices[i]) + "," + fmt(s.data_scores[i]) +
            "," + fmt(s.stats_scores[i]) + "\n";
  }
  write_text(path, text);
}

}  // namespace

Reconstructor model_reconstructor(const vae::ModelParams& params) {
  return [&params](const Image& image) { return vae::reconstruct(params, image, true); };
}

Image threshold(const Image& image, double t) {
  if (!(t > 0 && t < 1)) throw ConfigError("threshold must lie in (0, 1)");
  Image out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out.pixels()[i] = image.pixels()[i] < t ? Scalar(0) : Scalar(1);
  }
  return out;
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  // Snap values within a few ulps of a half so 17.00005 style inputs round
  // consistently despite binary representation.
  double r = std::round(scaled);
  const double frac = std::abs(scaled - std::trunc(scaled));
  if (std::abs(frac - 0.5) < 1e-9) r = std::trunc(scaled) + (scaled >= 0 ? 1.0 : -1.0);
  return r / scale;
}

double volume_fraction_diff(const Image& original, const Image& recon_thresholded) {
  if (!original.same_shape(recon_thresholded)) throw ShapeError("volume_fraction_diff: shapes differ");
  const std::size_t orig = count_line_pixels(original);
  if (orig == 0) throw ConfigError("volume_fraction_diff: original has no line pixels");
  const std::size_t recon = count_line_pixels(recon_thresholded);
  const double diff = std::abs(static_cast<double>(orig) - static_cast<double>(recon));
  return round_half_away(diff / static_cast<double>(orig) * 100.0, 4);
}

std::string_view to_string(LineOrientation o) {
  switch (o) {
    case LineOrientation::horizontal: return "H";
    case LineOrientation::vertical: return "V";
    case LineOrientation::ambiguous: return "A";
  }
  return "?";
}

LineOrientation from_ground_truth(data::Orientation o) {
  return o == data::Orientation::horizontal ? LineOrientation::horizontal : LineOrientation::vertical;
}

LineCount count_lines(const Image& binary) {
  const std::size_t h = binary.height(), w = binary.width();
  std::vector<int> label(h * w, -1);
  LineCount out;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (binary.pixels()[start] < 0.5 || label[start] >= 0) continue;
    const int id = static_cast<int>(out.count++);
    std::size_t r0 = h, r1 = 0, c0 = w, c1 = 0;
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / w, c = p % w;
      r0 = std::min(r0, r);
      r1 = std::max(r1, r);
      c0 = std::min(c0, c);
      c1 = std::max(c1, c);
      auto visit = [&](std::size_t q) {
        if (binary.pixels()[q] >= 0.5 && label[q] < 0) {
          label[q] = id;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - w);
      if (r + 1 < h) visit(p + w);
      if (c > 0) visit(p - 1);
      if (c + 1 < w) visit(p + 1);
    }
    const std::size_t bh = r1 - r0 + 1, bw = c1 - c0 + 1;
    out.orientations.push_back(bw > bh   ? LineOrientation::horizontal
                               : bh > bw ? LineOrientation::vertical
                                         : LineOrientation::ambiguous);
  }
  return out;
}

std::string_view to_string(Space s) { return s == Space::data ? "data" : "stats"; }

Space parse_space(std::string_view name) {
  if (name == "data") return Space::data;
  if (name == "stats") return Space::stats;
  throw ConfigError("unknown space '" + std::string(name) + "' (expected data or stats)");
}

NearestSearch::NearestSearch(std::vector<Image> images, Space space)
    : images_(std::move(images)), space_(space) {
  if (images_.empty()) throw ConfigError("nearest search over an empty dataset");
  features_.reserve(images_.size());
  for (const Image& img : images_) {
    if (!img.same_shape(images_.front())) throw ShapeError("nearest search: mixed image shapes");
    features_.push_back(represent(img));
  }
}

std::vector<Scalar> NearestSearch::represent(const Image& image) const {
  return space_ == Space::data ? image.pixels() : stats::autocorrelation(image).values();
}

NearestResult NearestSearch::scan(const std::vector<Scalar>& probe,
                                  std::optional<std::size_t> exclude) const {
  NearestResult best{0, 0, std::numeric_limits<double>::infinity(), space_};
  bool found = false;
  for (std::size_t j = 0; j < features_.size(); ++j) {
    if (exclude && *exclude == j) continue;
    const auto& f = features_[j];
    if (f.size() != probe.size()) throw ShapeError("nearest search: query shape mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = static_cast<double>(probe[i]) - static_cast<double>(f[i]);
      acc += d * d;
    }
    const double mse = acc / static_cast<double>(f.size());
    if (!found || mse < best.distance) {
      best.neighbor = j;
      best.distance = mse;
      found = true;
    }
  }
  if (!found) throw ConfigError("nearest search: no candidate besides the query");
  return best;
}

NearestResult NearestSearch::find(const Image& query) const { return scan(represent(query), {}); }

NearestResult NearestSearch::find_member(std::size_t index) const {
  if (index >= features_.size()) throw ConfigError("nearest search: query index out of range");
  NearestResult r = scan(features_[index], index);
  r.query = index;
  return r;
}

NearestResult nearest_in_dataset(const Image& query, const std::vector<Image>& dataset, Space space) {
  return NearestSearch(dataset, space).find(query);
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
  if (n > population) {
    throw ConfigError("cannot sample " + std::to_string(n) + " items from " +
                      std::to_string(population));
  }
  std::vector<std::size_t> order(population);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(derive_seed(seed, "sample"));
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(order[i], order[rng.uniform_int(i, population - 1)]);
  }
  order.resize(n);
  return order;
}

EvalReport evaluate_reconstructions(const Reconstructor& model, const data::Dataset& test_set,
                                    const EvalOptions& options) {
  if (test_set.count() == 0) throw ConfigError("evaluate: test set is empty");
  if (options.n == 0) throw ConfigError("evaluate: n must be positive");
  EvalReport report;
  std::size_t orient_ok = 0, orient_single_ok = 0, multiset_ok = 0, exact = 0, within = 0;
  std::size_t nearest_exact = 0;
  double agreement = 0, vf = 0, data_mse = 0, stats_mse = 0;

  for (std::size_t idx : sample_indices(test_set.count(), options.n, options.seed)) {
    const Image original = test_set.image(idx);
    const Image recon = model(original);
    if (!recon.same_shape(original)) throw ShapeError("evaluate: reconstruction shape mismatch");
    const Image binary = threshold(recon, options.threshold);

    PairMetrics m;
    m.index = idx;
    std::vector<LineOrientation> truth;
    for (const data::LineSpec& s : test_set.truth[idx]) truth.push_back(from_ground_truth(s.orientation));
    // Merged ground-truth lines are counted the way they rasterize.
    const LineCount truth_lines = count_lines(original);
    const LineCount recon_lines = count_lines(binary);
    m.truth_count = truth_lines.count;
    m.recon_count = recon_lines.count;
    m.truth_orientations = join(truth);
    m.recon_orientations = join(recon_lines.orientations);

    const std::set<LineOrientation> truth_set(truth.begin(), truth.end());
    const std::set<LineOrientation> recon_set(recon_lines.orientations.begin(),
                                              recon_lines.orientations.end());
    m.orientation_correct = truth_set == recon_set;

    std::multiset<LineOrientation> truth_ms(truth_lines.orientations.begin(),
                                            truth_lines.orientations.end());
    std::multiset<LineOrientation> recon_ms(recon_lines.orientations.begin(),
                                            recon_lines.orientations.end());
    m.orientation_multiset_correct = truth_ms == recon_ms;
    std::size_t common = 0;
    for (LineOrientation o : {LineOrientation::horizontal, LineOrientation::vertical}) {
      common += std::min(truth_ms.count(o), recon_ms.count(o));
    }
    const std::size_t denom = std::max(truth_ms.size(), recon_ms.size());
    m.per_line_agreement = denom ? static_cast<double>(common) / static_cast<double>(denom) : 1.0;

    m.count_exact = m.truth_count == m.recon_count;
    const auto gap = static_cast<long>(m.truth_count) - static_cast<long>(m.recon_count);
    m.count_within_one = std::abs(gap) <= 1;
    m.volume_fraction_diff_pct = volume_fraction_diff(original, binary);
    m.data_mse = pixel_mse(original, recon);
    m.stats_mse = stats::stats_distance(stats::autocorrelation(original),
                                        stats::autocorrelation(recon), stats::Metric::mse);
    if (options.reference != nullptr) {
      const NearestResult nr = options.reference->find(original);
      m.nearest_count = count_lines(options.reference->image(nr.neighbor)).count;
      nearest_exact += *m.nearest_count == m.truth_count;
    }

    if (test_set.truth[idx].size() == 1) {
      ++report.single_line_count;
      orient_single_ok += m.orientation_correct;
    }
    orient_ok += m.orientation_correct;
    multiset_ok += m.orientation_multiset_correct;
    exact += m.count_exact;
    within += m.count_within_one;
    agreement += m.per_line_agreement;
    vf += m.volume_fraction_diff_pct;
    data_mse += m.data_mse;
    stats_mse += m.stats_mse;
    report.pairs.push_back(std::move(m));
  }

  const auto n = static_cast<double>(report.pairs.size());
  report.sample_count = report.pairs.size();
  report.orientation_accuracy = static_cast<double>(orient_ok) / n;
  report.orientation_accuracy_single_line =
      report.single_line_count
          ? static_cast<double>(orient_single_ok) / static_cast<double>(report.single_line_count)
          : 0.0;
  report.orientation_multiset_accuracy = static_cast<double>(multiset_ok) / n;
  report.per_line_orientation_agreement = agreement / n;
  report.line_count_exact = static_cast<double>(exact) / n;
  report.line_count_within_one = static_cast<double>(within) / n;
  report.mean_volume_fraction_diff_pct = vf / n;
  report.mean_data_mse = data_mse / n;
  report.mean_stats_mse = stats_mse / n;
  report.nearest_line_count_exact =
      options.reference != nullptr ? static_cast<double>(nearest_exact) / n : 0.0;
  return report;
}

void EvalReport::write_summary_csv(const std::filesystem::path& path) const {
  std::string text =
      "sample_count,single_line_count,orientation_accuracy,orientation_accuracy_single_line,"
      "orientation_multiset_accuracy,per_line_orientation_agreement,line_count_exact,"
      "line_count_within_one,nearest_line_count_exact,mean_volume_fraction_diff_pct,"
      "mean_data_mse,mean_stats_mse\n";
  text += std::to_string(sample_count) + "," + std::to_string(single_line_count) + "," +
          fmt(orientation_accuracy) + "," + fmt(orientation_accuracy_single_line) + "," +
          fmt(orientation_multiset_accuracy) + "," + fmt(per_line_orientation_agreement) + "," +
          fmt(line_count_exact) + "," + fmt(line_count_within_one) + "," +
          fmt(nearest_line_count_exact) + "," + fixed4(mean_volume_fraction_diff_pct) + "," +
          fmt(mean_data_mse) + "," + fmt(mean_stats_mse) + "\n";
  write_text(path, text);
}

void EvalReport::write_pairs_csv(const std::filesystem::path& path) const {
  std::string text =
      "index,truth_count,recon_count,truth_orientations,recon_orientations,orientation_correct,"
      "orientation_multiset_correct,per_line_agreement,count_exact,count_within_one,"
      "volume_fraction_diff_pct,data_mse,stats_mse,nearest_count\n";
  for (const PairMetrics& m : pairs) {
    text += std::to_string(m.index) + "," + std::to_string(m.truth_count) + "," +
            std::to_string(m.recon_count) + "," + m.truth_orientations + "," +
            m.recon_orientations + "," + std::to_string(m.orientation_correct) + "," +
            std::to_string(m.orientation_multiset_correct) + "," + fmt(m.per_line_agreement) +
            "," + std::to_string(m.count_exact) + "," + std::to_string(m.count_within_one) + "," +
            fixed4(m.volume_fraction_diff_pct) + "," + fmt(m.data_mse) + "," + fmt(m.stats_mse) +
            "," + (m.nearest_count ? std::to_string(*m.nearest_count) : std::string()) + "\n";
  }
  write_text(path, text);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

void OverfitReport::write(const std::filesystem::path& dir) const {
  write_split_csv(train, dir / "overfit_train.csv");
  write_split_csv(val, dir / "overfit_val.csv");
  std::string text = "split,n,data_mean,data_std,stats_mean,stats_std\n";
  for (const auto& [name, s] : {std::pair<const char*, const OverfitSplit*>{"train", &train},
                                {"val", &val}}) {
    text += std::string(name) + "," + std::to_string(s->indices.size()) + "," + fmt(s->data_mean) +
            "," + fmt(s->data_std) + "," + fmt(s->stats_mean) + "," + fmt(s->stats_std) + "\n";
  }
  text += "ks_data," + fmt(ks_data) + ",,,,\n";
  text += "ks_stats," + fmt(ks_stats) + ",,,,\n";
  write_text(dir / "overfit_summary.csv", text);
}

OverfitReport overfit_report(const Reconstructor& model, const data::Dataset& train_set,
                             const data::Dataset& val_set, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("overfit_report: n must be positive");
  if (n > train_set.count() || n > val_set.count()) {
    throw ConfigError("overfit_report: n=" + std::to_string(n) + " exceeds a split size (train " +
                      std::to_string(train_set.count()) + ", val " +
                      std::to_string(val_set.count()) + ")");
  }
  OverfitReport r;
  r.train = score_split(model, train_set, n, derive_seed(seed, "overfit-train"));
  r.val = score_split(model, val_set, n, derive_seed(seed, "overfit-val"));
  r.ks_data = ks_statistic(r.train.data_scores, r.val.data_scores);
  r.ks_stats = ks_statistic(r.train.stats_scores, r.val.stats_scores);
  return r;
}

void ComparisonTable::write_csv(const std::filesystem::path& path) const {
  std::string text = "model,loss_mode,mean_data_mse,mean_stats_mse\n";
  for (const ComparisonRow& r : rows) {
    text += r.name + "," + r.loss_mode + "," + fmt(r.mean_data_mse) + "," + fmt(r.mean_stats_mse) + "\n";
  }
  for (const std::string& w : warnings) text += "# warning: " + w + "\n";
  write_text(path, text);
}

std::string ComparisonTable::format() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-10s %16s %16s\n", "model", "loss_mode",
                "mean_data_mse", "mean_stats_mse");
  out += line;
  for (const ComparisonRow& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %-10s %16.8g %16.8g\n", r.name.c_str(),
                  r.loss_mode.c_str(), r.mean_data_mse, r.mean_stats_mse);
    out += line;
  }
  std::snprintf(line, sizeof line, "stats-space MSE ratio (baseline / stats model): %.4f over %zu pairs\n",
                stats_mse_ratio, sample_count);
  out += line;
  for (const std::string& w : warnings) out += "warning: " + w + "\n";
  return out;
}

ComparisonTable compare_models(const vae::ModelParams& stats_model,
                               const vae::ModelParams& baseline_model,
                               const data::Dataset& test_set, std::size_t n, std::uint64_t seed) {
  if (test_set.count() == 0) throw ConfigError("compare_models: test set is empty");
  ComparisonTable table;
  if (!(stats_model.arch == baseline_model.arch)) {
    table.warnings.push_back("architectures differ");
  }
  std::set<std::string> keys;
  for (const auto& [k, v] : stats_model.metadata) keys.insert(k);
  for (const auto& [k, v] : baseline_model.metadata) keys.insert(k);
  for (const std::string& k : keys) {
    if (k == "loss_mode") continue;
    const auto a = stats_model.metadata.find(k);
    const auto b = baseline_model.metadata.find(k);
    const std::string va = a == stats_model.metadata.end() ? "<unset>" : a->second;
    const std::string vb = b == baseline_model.metadata.end() ? "<unset>" : b->second;
    if (va != vb) table.warnings.push_back("config mismatch on " + k + ": " + va + " vs " + vb);
  }

  const std::vector<std::size_t> indices = sample_indices(test_set.count(), n, seed);
  auto row_for = [&](const std::string& name, const vae::ModelParams& params) {
    ComparisonRow row;
    row.name = name;
    const auto it = params.metadata.find("loss_mode");
    row.loss_mode = it == params.metadata.end() ? "unknown" : it->second;
    for (std::size_t idx : indices) {
      const Image original = test_set.image(idx);
      const Image recon = vae::reconstruct(params, original, true);
      row.mean_data_mse += pixel_mse(original, recon);
      row.mean_stats_mse += stats::stats_distance(stats::autocorrelation(original),
                                                  stats::autocorrelation(recon), stats::Metric::mse);
    }
    row.mean_data_mse /= static_cast<double>(indices.size());
    row.mean_stats_mse /= static_cast<double>(indices.size());
    return row;
  };
  table.rows.push_back(row_for("stats", stats_model));
  table.rows.push_back(row_for("baseline", baseline_model));
  table.sample_count = indices.size();
  table.stats_mse_ratio = table.rows[0].mean_stats_mse > 0
                              ? table.rows[1].mean_stats_mse / table.rows[0].mean_stats_mse
                              : std::numeric_limits<double>::infinity();
  return table;
}

std::filesystem::path export_figure_grid(const std::vector<FigureRow>& rows,
                                         const std::filesystem::path& dir) {
  std::string manifest = "row,original,reconstruction,stats_original,stats_reconstruction\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const FigureRow& r = rows[i];
    if (!r.original.same_shape(r.reconstruction) || !r.stats_original.same_shape(r.stats_reconstruction) ||
        r.original.height() != r.stats_original.height() ||
        r.original.width() != r.stats_original.width()) {
      throw ShapeError("export_figure_grid: inconsistent shapes in row " + std::to_string(i));
    }
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "row%03zu_", i);
    const std::string names[4] = {std::string(prefix) + "original.pgm",
                                  std::string(prefix) + "reconstruction.pgm",
                                  std::string(prefix) + "stats_original.pgm",
                                  std::string(prefix) + "stats_reconstruction.pgm"};
    data::export_pgm(r.original, dir / names[0], true);
    data::export_pgm(r.reconstruction, dir / names[1], true);
    stats::write_stats_pgm(r.stats_original, dir / names[2]);
    stats::write_stats_pgm(r.stats_reconstruction, dir / names[3]);
    manifest += std::to_string(i) + "," + names[0] + "," + names[1] + "," + names[2] + "," +
                names[3] + "\n";
  }
  const std::filesystem::path path = dir / "manifest.csv";
  write_text(path, manifest);
  return path;
}

}  // namespace texstat::eval
