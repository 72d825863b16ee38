// SPDX-License-Identifier: Apache-2.0
//
// TSVM checkpoint, little-endian:
//   "TSVM" | u16 version = 1 | u16 reserved
//   architecture: u32 H | u32 W | u32 latent_dim | f64 leaky_slope
//                 | u32 n_enc | n_enc * u32 | u32 n_dec | n_dec * u32
//   u64 seed
//   u32 metadata entries, each u16 key length | key | u32 value length | value
//   u32 tensor count, each u16 name length | name | u8 rank | rank * u32 dims
//   then every tensor's values as float64, in declaration order.
#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "texstat/vae.hpp"

namespace texstat::vae {

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
/// Also throws FormatError(incompatible) when the stored architecture
/// differs from `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const Architecture& expected);

}  // namespace texstat::vae
