// SPDX-License-Identifier: Apache-2.0
#include "texstat/checkpoint.hpp"

#include <string>

#include "binary_io.hpp"
#include "texstat/error.hpp"

namespace texstat::vae {
namespace {

constexpr char kMagic[] = "TSVM";
constexpr std::uint16_t kVersion = 1;

void put_channels(io::ByteWriter& w, const std::vector<std::size_t>& channels) {
  w.u32(static_cast<std::uint32_t>(channels.size()));
  for (std::size_t c : channels) w.u32(static_cast<std::uint32_t>(c));
}

std::vector<std::size_t> get_channels(io::ByteReader& r) {
  const std::uint32_t n = r.u32();
  r.need(std::size_t{n} * 4);
  std::vector<std::size_t> out(n);
  for (auto& c : out) c = r.u32();
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params) {
  check_consistent(params);
  io::ByteWriter w;
  w.tag(kMagic);
  w.u16(kVersion);
  w.u16(0);
  const Architecture& a = params.arch;
  w.u32(static_cast<std::uint32_t>(a.height));
  w.u32(static_cast<std::uint32_t>(a.width));
  w.u32(static_cast<std::uint32_t>(a.latent_dim));
  w.f64(a.leaky_slope);
  put_channels(w, a.encoder_channels);
  put_channels(w, a.decoder_channels);
  w.u64(params.seed);

  w.u32(static_cast<std::uint32_t>(params.metadata.size()));
  for (const auto& [key, value] : params.metadata) {
    w.u16(static_cast<std::uint16_t>(key.size()));
    w.tag(key);
    w.u32(static_cast<std::uint32_t>(value.size()));
    w.tag(value);
  }

  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const NamedTensor& t : params.tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.tag(t.name);
    w.u8(static_cast<std::uint8_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const NamedTensor& t : params.tensors) {
    for (Scalar v : t.value.values()) w.f64(static_cast<double>(v));
  }
  return w.buffer();
}

ModelParams deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 4 || r.tag(4) != kMagic) {
    throw FormatError(FormatError::Kind::bad_magic, "checkpoint: bad magic (expected TSVM)");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      "checkpoint: unsupported version " + std::to_string(version));
  }
  r.u16();

  ModelParams params;
  Architecture& a = params.arch;
  a.height = r.u32();
  a.width = r.u32();
  a.latent_dim = r.u32();
  a.leaky_slope = r.f64();
  a.encoder_channels = get_channels(r);
  a.decoder_channels = get_channels(r);
  params.seed = r.u64();

  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.tag(r.u16());
    std::string value = r.tag(r.u32());
    params.metadata.emplace(std::move(key), std::move(value));
  }

  const std::uint32_t n_tensors = r.u32();
  std::vector<std::pair<std::string, Shape>> shapes;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.tag(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    shapes.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : shapes) {
    const std::size_t n = element_count(shape);
    r.need(n * 8);
    std::vector<Scalar> data(n);
    for (Scalar& v : data) v = static_cast<Scalar>(r.f64());
    params.tensors.push_back({name, Tensor(shape, std::move(data))});
  }
  if (r.remaining() != 0) {
    throw FormatError(FormatError::Kind::inconsistent, "checkpoint: trailing bytes");
  }
  try {
    check_consistent(params);
  } catch (const Error& e) {
    throw FormatError(FormatError::Kind::inconsistent, std::string("checkpoint: ") + e.what());
  }
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

ModelParams load_checkpoint(const std::filesystem::path& path, const Architecture& expected) {
  ModelParams params = load_checkpoint(path);
  if (!(params.arch == expected)) {
    throw FormatError(FormatError::Kind::incompatible,
                      path.string() + ": checkpoint architecture does not match");
  }
  return params;
}

}  // namespace texstat::vae
