// SPDX-License-Identifier: Apache-2.0
#include "texstat/spatial_stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "binary_io.hpp"
#include "texstat/error.hpp"
#include "texstat/fft.hpp"
#include "texstat/pgm.hpp"

namespace texstat::stats {
namespace {

using fft::Complex;

std::vector<Complex> to_complex(std::span<const Scalar> values) {
  std::vector<Complex> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = Complex(values[i], 0.0);
  return out;
}

void require_finite(const Image& image, const char* context) {
  for (Scalar v : image.pixels()) {
    if (!std::isfinite(v)) throw NumericError(std::string(context) + ": non-finite pixel");
  }
}

// (1/N) Re IFFT(conj(A) * B), the unnormalised inverse divided by N^2.
std::vector<Scalar> correlate_spectra(const std::vector<Complex>& fa,
                                      const std::vector<Complex>& fb, std::size_t rows,
                                      std::size_t cols) {
  std::vector<Complex> prod(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) prod[i] = std::conj(fa[i]) * fb[i];
  fft::transform_2d(prod, rows, cols, true);
  const double scale = 1.0 / (static_cast<double>(rows * cols) * static_cast<double>(rows * cols));
  std::vector<Scalar> out(prod.size());
  for (std::size_t i = 0; i < prod.size(); ++i) out[i] = static_cast<Scalar>(prod[i].real() * scale);
  return out;
}

StatsMap shifted(const StatsMap& s, long sy, long sx) {
  const auto h = static_cast<long>(s.height()), w = static_cast<long>(s.width());
  std::vector<Scalar> out(s.size());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const long ty = ((y + sy) % h + h) % h;
      const long tx = ((x + sx) % w + w) % w;
      out[static_cast<std::size_t>(ty * w + tx)] = s.values()[static_cast<std::size_t>(y * w + x)];
    }
  }
  return StatsMap(s.height(), s.width(), std::move(out));
}

constexpr char kRawMagic[] = "STAT";
constexpr std::uint16_t kRawVersion = 1;

}  // namespace

std::string_view to_string(Metric metric) {
  return metric == Metric::mse ? "mse" : "l2_norm";
}

Metric parse_metric(std::string_view name) {
  if (name == "mse") return Metric::mse;
  if (name == "l2_norm" || name == "l2") return Metric::l2_norm;
  throw ConfigError("unknown metric '" + std::string(name) + "' (expected mse or l2_norm)");
}

StatsMap::StatsMap(std::size_t height, std::size_t width, std::vector<Scalar> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height_ * width_) throw ShapeError("StatsMap: value count mismatch");
}

Scalar StatsMap::at(long dy, long dx) const {
  const auto h = static_cast<long>(height_), w = static_cast<long>(width_);
  const long y = ((dy % h) + h) % h;
  const long x = ((dx % w) + w) % w;
  return values_[static_cast<std::size_t>(y * w + x)];
}

StatsMap autocorrelation(const Image& image) {
  require_finite(image, "autocorrelation");
  std::vector<Complex> spectrum = to_complex(image.pixels());
  fft::transform_2d(spectrum, image.height(), image.width(), false);
  return StatsMap(image.height(), image.width(),
                  correlate_spectra(spectrum, spectrum, image.height(), image.width()));
}

StatsMap cross_correlation(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("cross_correlation: image shapes differ");
  require_finite(a, "cross_correlation");
  require_finite(b, "cross_correlation");
  std::vector<Complex> fa = to_complex(a.pixels());
  std::vector<Complex> fb = to_complex(b.pixels());
  fft::transform_2d(fa, a.height(), a.width(), false);
  fft::transform_2d(fb, b.height(), b.width(), false);
  return StatsMap(a.height(), a.width(), correlate_spectra(fa, fb, a.height(), a.width()));
}

StatsMap cross_correlation(const std::vector<Image>& state_fields, LocalStatePair pair) {
  if (pair.h >= state_fields.size() || pair.h_prime >= state_fields.size()) {
    throw ConfigError("cross_correlation: state index out of range");
  }
  return cross_correlation(state_fields[pair.h], state_fields[pair.h_prime]);
}

StatsMap brute_force_autocorr(const Image& image) {
  const std::size_t h = image.height(), w = image.width();
  if (h * w > 4096) throw ConfigError("brute_force_autocorr: image larger than 4096 pixels");
  require_finite(image, "brute_force_autocorr");
  std::vector<Scalar> out(h * w);
  const double n = static_cast<double>(h * w);
  for (std::size_t dy = 0; dy < h; ++dy) {
    for (std::size_t dx = 0; dx < w; ++dx) {
      double sum = 0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          sum += image.at(y, x) * image.at((y + dy) % h, (x + dx) % w);
        }
      }
      out[dy * w + dx] = static_cast<Scalar>(sum / n);
    }
  }
  return StatsMap(h, w, std::move(out));
}

StatsMap autocorrelation_via_dft(const Image& image) {
  require_finite(image, "autocorrelation_via_dft");
  const std::size_t h = image.height(), w = image.width();
  const std::vector<Complex> spectrum = fft::dft_2d(to_complex(image.pixels()), h, w, false);
  std::vector<Complex> power(spectrum.size());
  for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(spectrum[i]);
  const std::vector<Complex> back = fft::dft_2d(power, h, w, true);
  const double scale = 1.0 / (static_cast<double>(h * w) * static_cast<double>(h * w));
  std::vector<Scalar> out(back.size());
  for (std::size_t i = 0; i < back.size(); ++i) out[i] = static_cast<Scalar>(back[i].real() * scale);
  return StatsMap(h, w, std::move(out));
}

double stats_distance(const StatsMap& a, const StatsMap& b, Metric metric) {
  if (!a.same_shape(b)) throw ShapeError("stats_distance: map shapes differ");
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]);
    sum += d * d;
  }
  return metric == Metric::mse ? sum / static_cast<double>(a.size()) : std::sqrt(sum);
}

ad::Var stats_loss(const Image& x, ad::Var x_hat, Metric metric) {
  const std::size_t rows = x.height(), cols = x.width();
  const std::size_t n = rows * cols;
  if (x_hat.value().size() != n) {
    throw ShapeError("stats_loss: reconstruction " + texstat::to_string(x_hat.shape()) +
                     " does not match image " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  const StatsMap target = autocorrelation(x);

  auto spectrum = std::make_shared<std::vector<Complex>>(to_complex(x_hat.value().values()));
  fft::transform_2d(*spectrum, rows, cols, false);
  const std::vector<Scalar> current = correlate_spectra(*spectrum, *spectrum, rows, cols);

  // Adjoint of the loss with respect to each lag of the reconstruction's map.
  auto lag_grad = std::make_shared<std::vector<double>>(n);
  double sum_sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(current[i]) - static_cast<double>(target.values()[i]);
    (*lag_grad)[i] = d;
    sum_sq += d * d;
  }
  double loss = 0;
  if (metric == Metric::mse) {
    loss = sum_sq / static_cast<double>(n);
    for (double& g : *lag_grad) g *= 2.0 / static_cast<double>(n);
  } else {
    loss = std::sqrt(sum_sq);
    const double inv = loss > 0 ? 1.0 / loss : 0.0;
    for (double& g : *lag_grad) g *= inv;
  }

  return x_hat.tape().record(
      "stats_loss", Tensor::scalar(static_cast<Scalar>(loss)), {x_hat},
      [x_hat, spectrum, lag_grad, rows, cols, n](ad::Tape& tape, const Tensor& g) {
        Tensor* dx = tape.adjoint_slot(x_hat);
        if (dx == nullptr) return;
        // d f[r] / d y[u] = (y[u + r] + y[u - r]) / N, so the image adjoint is
        // IFFT(2 Re(G) Y) / N^2 with G the transform of the lag adjoint.
        std::vector<Complex> lag_spectrum(n);
        for (std::size_t i = 0; i < n; ++i) lag_spectrum[i] = Complex((*lag_grad)[i], 0.0);
        fft::transform_2d(lag_spectrum, rows, cols, false);
        for (std::size_t i = 0; i < n; ++i) {
          lag_spectrum[i] = 2.0 * lag_spectrum[i].real() * (*spectrum)[i];
        }
        fft::transform_2d(lag_spectrum, rows, cols, true);
        const double scale = static_cast<double>(g[0]) /
                             (static_cast<double>(n) * static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
          (*dx)[i] += static_cast<Scalar>(lag_spectrum[i].real() * scale);
        }
      });
}

StatsMap fftshift_view(const StatsMap& s) {
  return shifted(s, static_cast<long>(s.height() / 2), static_cast<long>(s.width() / 2));
}

StatsMap ifftshift_view(const StatsMap& s) {
  return shifted(s, -static_cast<long>(s.height() / 2), -static_cast<long>(s.width() / 2));
}

void write_stats_raw(const StatsMap& s, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.tag(kRawMagic);
  w.u16(kRawVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(s.height()));
  w.u32(static_cast<std::uint32_t>(s.width()));
  for (Scalar v : s.values()) w.f64(static_cast<double>(v));
  io::write_file(path, w.buffer());
}

StatsMap read_stats_raw(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> data = io::read_file(path);
  io::ByteReader r(data, path.string());
  if (r.remaining() < 4 || r.tag(4) != kRawMagic) {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + ": not a STAT file");
  }
  if (r.u16() != kRawVersion) {
    throw FormatError(FormatError::Kind::bad_version, path.string() + ": unsupported version");
  }
  r.u16();
  const std::size_t h = r.u32(), w = r.u32();
  r.need(h * w * 8);
  std::vector<Scalar> values(h * w);
  for (Scalar& v : values) v = static_cast<Scalar>(r.f64());
  return StatsMap(h, w, std::move(values));
}

void write_stats_pgm(const StatsMap& s, const std::filesystem::path& path) {
  const StatsMap centred = fftshift_view(s);
  const auto [lo, hi] = std::minmax_element(centred.values().begin(), centred.values().end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  GrayBitmap bm{s.height(), s.width(), std::vector<std::uint8_t>(s.size())};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = range > 0 ? (centred.values()[i] - *lo) / range : 0.0;
    bm.pixels[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
  }
  write_pgm(path, bm);
}

}  // namespace texstat::stats
