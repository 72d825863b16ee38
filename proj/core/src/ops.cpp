// SPDX-License-Identifier: Apache-2.0
#include "texstat/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>

#include "texstat/error.hpp"

namespace texstat::ad {
namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

void require_rank(const char* op, Var v, std::size_t rank) {
  if (v.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(v.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width, kernel, out_height, out_width;
  int stride, padding;
  std::size_t patch() const { return channels * kernel * kernel; }
  std::size_t pixels() const { return out_height * out_width; }
};

// cols is [C*k*k x H'*W'] row-major.
void im2col(const ConvGeometry& g, const Scalar* in, Scalar* cols) {
  const auto k = static_cast<long>(g.kernel);
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const Scalar* plane = in + c * g.height * g.width;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx, ++row) {
        Scalar* dst = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const long y = static_cast<long>(oy) * g.stride - g.padding + ky;
          Scalar* line = dst + oy * g.out_width;
          if (y < 0 || y >= h) {
            for (std::size_t ox = 0; ox < g.out_width; ++ox) line[ox] = 0;
            continue;
          }
          const Scalar* src = plane + y * w;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const long x = static_cast<long>(ox) * g.stride - g.padding + kx;
            line[ox] = (x < 0 || x >= w) ? Scalar(0) : src[x];
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const Scalar* cols, Scalar* out) {
  const auto k = static_cast<long>(g.kernel);
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    Scalar* plane = out + c * g.height * g.width;
    for (long ky = 0; ky < k; ++ky) {
      for (long kx = 0; kx < k; ++kx, ++row) {
        const Scalar* src = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const long y = static_cast<long>(oy) * g.stride - g.padding + ky;
          if (y < 0 || y >= h) continue;
          const Scalar* line = src + oy * g.out_width;
          Scalar* dst = plane + y * w;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const long x = static_cast<long>(ox) * g.stride - g.padding + kx;
            if (x >= 0 && x < w) dst[x] += line[ox];
          }
        }
      }
    }
  }
}

template <class Forward, class Derivative>
Var elementwise(const char* name, Var input, Forward forward, Derivative derivative) {
  Tensor out(input.shape());
  const Tensor& x = input.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = forward(x[i]);
  const std::size_t in_index = input.index();
  const std::size_t out_index = input.tape().size();
  return input.tape().record(
      name, std::move(out), {input},
      [input, in_index, out_index, derivative](Tape& tape, const Tensor& g) {
        const Tensor& xv = tape.value(in_index);
        const Tensor& yv = tape.value(out_index);
        Tensor dx(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) dx[i] = g[i] * derivative(xv[i], yv[i]);
        tape.accumulate(input, dx);
      });
}

}  // namespace

Var affine(Var input, Var weights, Var bias) {
  require_rank("affine weights", weights, 2);
  const std::size_t n_out = weights.shape()[0], n_in = weights.shape()[1];
  if (input.value().size() != n_in || bias.value().size() != n_out) {
    throw ShapeError("affine: input " + to_string(input.shape()) + ", weights " +
                     to_string(weights.shape()) + ", bias " + to_string(bias.shape()));
  }
  Tensor out(Shape{n_out});
  ConstMatrixMap w(weights.value().data(), n_out, n_in);
  VectorMap(out.data(), n_out) = w * ConstVectorMap(input.value().data(), n_in) +
                                 ConstVectorMap(bias.value().data(), n_out);
  return input.tape().record(
      "affine", std::move(out), {input, weights, bias},
      [input, weights, bias, n_in, n_out](Tape& tape, const Tensor& g) {
        ConstVectorMap gv(g.data(), n_out);
        if (Tensor* dx = tape.adjoint_slot(input)) {
          ConstMatrixMap w(weights.value().data(), n_out, n_in);
          VectorMap(dx->data(), n_in).noalias() += w.transpose() * gv;
        }
        if (Tensor* dw = tape.adjoint_slot(weights)) {
          MatrixMap(dw->data(), n_out, n_in).noalias() +=
              gv * ConstVectorMap(input.value().data(), n_in).transpose();
        }
        if (Tensor* db = tape.adjoint_slot(bias)) VectorMap(db->data(), n_out) += gv;
      });
}

Var conv2d(Var input, Var kernels, int stride, int padding) {
  require_rank("conv2d input", input, 3);
  require_rank("conv2d kernels", kernels, 4);
  const Shape& is = input.shape();
  const Shape& ks = kernels.shape();
  if (ks[1] != is[0] || ks[2] != ks[3]) {
    throw ShapeError("conv2d: input " + to_string(is) + " incompatible with kernels " +
                     to_string(ks));
  }
  if (ks[2] % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1, padding >= 0");
  const long span_h = static_cast<long>(is[1]) + 2L * padding - static_cast<long>(ks[2]);
  const long span_w = static_cast<long>(is[2]) + 2L * padding - static_cast<long>(ks[2]);
  if (span_h < 0 || span_w < 0) throw ShapeError("conv2d: nonpositive output dimensions");

  ConvGeometry geo{is[0], is[1], is[2], ks[2],
                   static_cast<std::size_t>(span_h / stride + 1),
                   static_cast<std::size_t>(span_w / stride + 1), stride, padding};
  const std::size_t c_out = ks[0];

  auto cols = std::make_shared<std::vector<Scalar>>(geo.patch() * geo.pixels());
  im2col(geo, input.value().data(), cols->data());

  Tensor out(Shape{c_out, geo.out_height, geo.out_width});
  ConstMatrixMap k(kernels.value().data(), c_out, geo.patch());
  ConstMatrixMap col(cols->data(), geo.patch(), geo.pixels());
  MatrixMap(out.data(), c_out, geo.pixels()).noalias() = k * col;

  return input.tape().record(
      "conv2d", std::move(out), {input, kernels},
      [input, kernels, geo, c_out, cols](Tape& tape, const Tensor& g) {
        ConstMatrixMap gm(g.data(), c_out, geo.pixels());
        if (Tensor* dk = tape.adjoint_slot(kernels)) {
          ConstMatrixMap col(cols->data(), geo.patch(), geo.pixels());
          MatrixMap(dk->data(), c_out, geo.patch()).noalias() += gm * col.transpose();
        }
        if (Tensor* dx = tape.adjoint_slot(input)) {
          ConstMatrixMap k(kernels.value().data(), c_out, geo.patch());
          std::vector<Scalar> dcols(geo.patch() * geo.pixels());
          MatrixMap(dcols.data(), geo.patch(), geo.pixels()).noalias() = k.transpose() * gm;
          col2im(geo, dcols.data(), dx->data());
        }
      });
}

Var add_channel_bias(Var input, Var bias) {
  require_rank("add_channel_bias input", input, 3);
  const std::size_t channels = input.shape()[0];
  const std::size_t plane = input.shape()[1] * input.shape()[2];
  if (bias.value().size() != channels) {
    throw ShapeError("add_channel_bias: bias " + to_string(bias.shape()) + " for input " +
                     to_string(input.shape()));
  }
  Tensor out = input.value();
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar b = bias.value()[c];
    Scalar* p = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
  return input.tape().record(
      "add_channel_bias", std::move(out), {input, bias},
      [input, bias, channels, plane](Tape& tape, const Tensor& g) {
        tape.accumulate(input, g);
        if (Tensor* db = tape.adjoint_slot(bias)) {
          for (std::size_t c = 0; c < channels; ++c) {
            Scalar sum = 0;
            const Scalar* p = g.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            (*db)[c] += sum;
          }
        }
      });
}

Var upsample_nearest(Var input, int factor) {
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  require_rank("upsample_nearest", input, 3);
  const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
  const auto f = static_cast<std::size_t>(factor);
  Tensor out(Shape{c, h * f, w * f});
  const Tensor& x = input.value();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h * f; ++y) {
      const Scalar* src = x.data() + (ch * h + y / f) * w;
      Scalar* dst = out.data() + (ch * h * f + y) * w * f;
      for (std::size_t xx = 0; xx < w * f; ++xx) dst[xx] = src[xx / f];
    }
  }
  return input.tape().record(
      "upsample_nearest", std::move(out), {input},
      [input, c, h, w, f](Tape& tape, const Tensor& g) {
        Tensor* dx = tape.adjoint_slot(input);
        if (dx == nullptr) return;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t y = 0; y < h * f; ++y) {
            const Scalar* src = g.data() + (ch * h * f + y) * w * f;
            Scalar* dst = dx->data() + (ch * h + y / f) * w;
            for (std::size_t xx = 0; xx < w * f; ++xx) dst[xx / f] += src[xx];
          }
        }
      });
}

Var leaky_rectifier(Var input, Scalar slope) {
  return elementwise(
      "leaky_rectifier", input, [slope](Scalar x) { return x > 0 ? x : slope * x; },
      [slope](Scalar x, Scalar) { return x > 0 ? Scalar(1) : slope; });
}

Var sigmoid(Var input) {
  return elementwise(
      "sigmoid", input,
      [](Scalar x) {
        if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
        const Scalar e = std::exp(x);
        return e / (Scalar(1) + e);
      },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

Var exp(Var input) {
  return elementwise(
      "exp", input, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Var sqrt(Var input) {
  for (Scalar v : input.value().values()) {
    if (v < 0) throw NumericError("sqrt of a negative value");
  }
  return elementwise(
      "sqrt", input, [](Scalar x) { return std::sqrt(x); },
      [](Scalar, Scalar y) { return y > 0 ? Scalar(0.5) / y : Scalar(0); });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    if (Tensor* db = tape.adjoint_slot(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* da = tape.adjoint_slot(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * b.value()[i];
    }
    if (Tensor* db = tape.adjoint_slot(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * a.value()[i];
    }
  });
}

Var mul_scalar(Var input, Scalar factor) {
  return elementwise(
      "mul_scalar", input, [factor](Scalar x) { return x * factor; },
      [factor](Scalar, Scalar) { return factor; });
}

Var reduce_sum(Var input) {
  Scalar sum = 0;
  for (Scalar v : input.value().values()) sum += v;
  return input.tape().record("reduce_sum", Tensor::scalar(sum), {input},
                             [input](Tape& tape, const Tensor& g) {
                               Tensor* dx = tape.adjoint_slot(input);
                               if (dx == nullptr) return;
                               for (Scalar& v : dx->values()) v += g[0];
                             });
}

Var reduce_mean(Var input) {
  const auto n = static_cast<Scalar>(input.value().size());
  return mul_scalar(reduce_sum(input), Scalar(1) / n);
}

Var reshape(Var input, Shape shape) {
  Tensor out = input.value().reshaped(std::move(shape));
  return input.tape().record("reshape", std::move(out), {input},
                             [input](Tape& tape, const Tensor& g) {
                               Tensor* dx = tape.adjoint_slot(input);
                               if (dx == nullptr) return;
                               for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
                             });
}

}  // namespace texstat::ad
