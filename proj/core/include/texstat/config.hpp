// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: `key = value` files with `#` comments, command-line
// overrides and a resolved form written next to every output.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "texstat/dataset.hpp"
#include "texstat/train.hpp"
#include "texstat/vae.hpp"

namespace texstat {

/// Raw key/value pairs. Later assignments of the same key win.
using KeyValues = std::map<std::string, std::string, std::less<>>;

/// Parses `key = value` lines. Blank lines and text after `#` are ignored.
/// Throws ConfigError with the line number on malformed input.
KeyValues parse_key_values(std::string_view text);
/// Throws IoError when the file cannot be read.
KeyValues load_key_values(const std::filesystem::path& path);

struct RunConfig {
  /// Master seed. Every stochastic stage draws from derive_seed(seed, label)
  /// with the labels "dataset", "split", "train" and "eval".
  std::uint64_t seed = 0;
  data::DatasetConfig dataset;
  vae::Architecture arch;
  vae::TrainConfig train;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  std::size_t eval_n = 100;
  double eval_threshold = 0.05;
  std::size_t checkpoint_every = 0;

  /// Applies keys on top of the current values. Unknown keys and unparsable
  /// values throw ConfigError.
  void apply(const KeyValues& values);
  /// Fills the derived seeds and keeps the image size in sync between the
  /// dataset and the architecture. Call after the last apply().
  void finalize();
  void validate() const;

  std::uint64_t dataset_seed() const;
  std::uint64_t split_seed() const;
  std::uint64_t train_seed() const;
  std::uint64_t eval_seed() const;

  /// Every key with its effective value, parseable by parse_key_values.
  KeyValues to_key_values() const;
  std::string to_text() const;
  void write(const std::filesystem::path& path) const;
};

/// `flag` if given, otherwise TEXSTAT_THREADS, otherwise the hardware count.
unsigned resolve_threads(std::optional<unsigned> flag);

}  // namespace texstat
