// SPDX-License-Identifier: Apache-2.0
#include "texstat/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

#include "binary_io.hpp"
#include "texstat/error.hpp"
#include "texstat/rng.hpp"

namespace texstat {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: " + std::string(key) + " expects a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: " + std::string(key) + " expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(parse_u64(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.insert_or_assign(std::string(key), std::string(value));
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  return parse_key_values(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void RunConfig::apply(const KeyValues& values) {
  using Setter = std::function<void(std::string_view, std::string_view)>;
  auto size_field = [](std::size_t& f) {
    return Setter([&f](std::string_view k, std::string_view v) { f = parse_u64(k, v); });
  };
  auto double_field = [](double& f) {
    return Setter([&f](std::string_view k, std::string_view v) { f = parse_double(k, v); });
  };
  const std::map<std::string_view, Setter> setters{
      {"seed", [this](std::string_view k, std::string_view v) { seed = parse_u64(k, v); }},
      {"size",
       [this](std::string_view k, std::string_view v) {
         dataset.height = dataset.width = parse_u64(k, v);
       }},
      {"n_images", size_field(dataset.n_images)},
      {"height", size_field(dataset.height)},
      {"width", size_field(dataset.width)},
      {"lines_min", size_field(dataset.lines_min)},
      {"lines_max", size_field(dataset.lines_max)},
      {"length_frac_min", double_field(dataset.length_frac_min)},
      {"length_frac_max", double_field(dataset.length_frac_max)},
      {"thickness_frac", double_field(dataset.thickness_frac)},
      {"latent_dim", size_field(arch.latent_dim)},
      {"encoder_channels",
       [this](std::string_view k, std::string_view v) { arch.encoder_channels = parse_list(k, v); }},
      {"decoder_channels",
       [this](std::string_view k, std::string_view v) { arch.decoder_channels = parse_list(k, v); }},
      {"leaky_slope", double_field(arch.leaky_slope)},
      {"alpha", double_field(train.alpha)},
      {"beta", double_field(train.beta)},
      {"learning_rate", double_field(train.learning_rate)},
      {"batch_size", size_field(train.batch_size)},
      {"epochs", size_field(train.epochs)},
      {"loss_mode",
       [this](std::string_view, std::string_view v) { train.loss_mode = vae::parse_loss_mode(v); }},
      {"metric", [this](std::string_view, std::string_view v) { train.metric = stats::parse_metric(v); }},
      {"adam_beta1", double_field(train.adam_beta1)},
      {"adam_beta2", double_field(train.adam_beta2)},
      {"adam_epsilon", double_field(train.adam_epsilon)},
      {"split_train", double_field(split_fractions[0])},
      {"split_val", double_field(split_fractions[1])},
      {"split_test", double_field(split_fractions[2])},
      {"eval_n", size_field(eval_n)},
      {"eval_threshold", double_field(eval_threshold)},
      {"checkpoint_every", size_field(checkpoint_every)},
  };
  for (const auto& [key, value] : values) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(key, value);
  }
}

void RunConfig::finalize() {
  dataset.seed = dataset_seed();
  train.seed = train_seed();
  arch.height = dataset.height;
  arch.width = dataset.width;
}

void RunConfig::validate() const {
  dataset.validate();
  arch.validate();
  train.validate();
  double sum = 0;
  for (double f : split_fractions) {
    if (!(f >= 0.0)) throw ConfigError("config: split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("config: split fractions must sum to 1");
  if (eval_n == 0) throw ConfigError("config: eval_n must be positive");
  if (!(eval_threshold > 0.0 && eval_threshold < 1.0)) {
    throw ConfigError("config: eval_threshold must lie in (0, 1)");
  }
}

std::uint64_t RunConfig::dataset_seed() const { return derive_seed(seed, "dataset"); }
std::uint64_t RunConfig::split_seed() const { return derive_seed(seed, "split"); }
std::uint64_t RunConfig::train_seed() const { return derive_seed(seed, "train"); }
std::uint64_t RunConfig::eval_seed() const { return derive_seed(seed, "eval"); }

KeyValues RunConfig::to_key_values() const {
  return {
      {"seed", std::to_string(seed)},
      {"n_images", std::to_string(dataset.n_images)},
      {"height", std::to_string(dataset.height)},
      {"width", std::to_string(dataset.width)},
      {"lines_min", std::to_string(dataset.lines_min)},
      {"lines_max", std::to_string(dataset.lines_max)},
      {"length_frac_min", format_double(dataset.length_frac_min)},
      {"length_frac_max", format_double(dataset.length_frac_max)},
      {"thickness_frac", format_double(dataset.thickness_frac)},
      {"latent_dim", std::to_string(arch.latent_dim)},
      {"encoder_channels", format_list(arch.encoder_channels)},
      {"decoder_channels", format_list(arch.decoder_channels)},
      {"leaky_slope", format_double(arch.leaky_slope)},
      {"alpha", format_double(train.alpha)},
      {"beta", format_double(train.beta)},
      {"learning_rate", format_double(train.learning_rate)},
      {"batch_size", std::to_string(train.batch_size)},
      {"epochs", std::to_string(train.epochs)},
      {"loss_mode", std::string(vae::to_string(train.loss_mode))},
      {"metric", std::string(stats::to_string(train.metric))},
      {"adam_beta1", format_double(train.adam_beta1)},
      {"adam_beta2", format_double(train.adam_beta2)},
      {"adam_epsilon", format_double(train.adam_epsilon)},
      {"split_train", format_double(split_fractions[0])},
      {"split_val", format_double(split_fractions[1])},
      {"split_test", format_double(split_fractions[2])},
      {"eval_n", std::to_string(eval_n)},
      {"eval_threshold", format_double(eval_threshold)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
  };
}

std::string RunConfig::to_text() const {
  std::string out = "# resolved texstat configuration\n";
  for (const auto& [k, v] : to_key_values()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  const std::string text = to_text();
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be positive");
    return *flag;
  }
  if (const char* env = std::getenv("TEXSTAT_THREADS"); env != nullptr && *env != '\0') {
    const std::uint64_t n = parse_u64("TEXSTAT_THREADS", env);
    if (n == 0 || n > 4096) throw ConfigError("TEXSTAT_THREADS must be in 1..4096");
    return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace texstat
