// Copyright 2026 The RTGMFF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rtgmff/num/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rtgmff::num {
namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  if (b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.shape().back()) return Broadcast::kRow;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                              shape_str(b.shape()));
}

double bval(const Tensor& b, Broadcast kind, std::size_t flat, std::size_t last) {
  switch (kind) {
    case Broadcast::kSame:
      return b.data()[flat];
    case Broadcast::kScalar:
      return b.data()[0];
    default:
      return b.data()[flat % last];
  }
}

void accum_b(std::vector<double>& gb, Broadcast kind, std::size_t flat, std::size_t last, double v) {
  switch (kind) {
    case Broadcast::kSame:
      gb[flat] += v;
      break;
    case Broadcast::kScalar:
      gb[0] += v;
      break;
    default:
      gb[flat % last] += v;
      break;
  }
}

template <typename Fwd, typename Bwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  const auto kind = broadcast_kind(name, a, b);
  const std::size_t n = static_cast<std::size_t>(a.numel());
  const std::size_t last = static_cast<std::size_t>(a.shape().back());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i], bval(b, kind, i, last));
  Tensor y(a.shape(), std::move(out));
  check_finite(y, name);
  if (should_record({&a, &b})) {
    auto ai = a.impl();
    auto bi = b.impl();
    auto yi = y.impl();
    Tape::active().record({ai, bi}, yi, [ai, bi, yi, kind, last, bwd] {
      const auto& g = yi->grad;
      auto& ga = grad_buffer(ai);
      auto& gb = grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) {
        double da, db;
        double bv = (kind == Broadcast::kSame) ? bi->data[i]
                    : (kind == Broadcast::kScalar) ? bi->data[0]
                                                   : bi->data[i % last];
        bwd(ai->data[i], bv, g[i], da, db);
        ga[i] += da;
        accum_b(gb, kind, i, last, db);
      }
    });
  }
  return y;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Bwd bwd) {
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i]);
  Tensor y(a.shape(), std::move(out));
  check_finite(y, name);
  if (should_record({&a})) {
    auto ai = a.impl();
    auto yi = y.impl();
    Tape::active().record({ai}, yi, [ai, yi, bwd] {
      const auto& g = yi->grad;
      auto& ga = grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += bwd(ai->data[i], yi->data[i]) * g[i];
    });
  }
  return y;
}

// Reflect index into [0, n-1] without repeating the edge sample.
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

struct PadResolver {
  std::int64_t h, w;
  int pad;
  PadMode mode;
  // Maps a padded coordinate to a source coordinate, or -1 for zero pad.
  std::int64_t row(std::int64_t y) const {
    y -= pad;
    if (y >= 0 && y < h) return y;
    return mode == PadMode::kReflect ? reflect_index(y, h) : -1;
  }
  std::int64_t col(std::int64_t x) const {
    x -= pad;
    if (x >= 0 && x < w) return x;
    return mode == PadMode::kReflect ? reflect_index(x, w) : -1;
  }
};

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  // Subgradient at exactly 0 is taken as 0.
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor y = Tensor::zeros({m, n});
  {
    ConstMatMap A(a.data(), m, k), B(b.data(), k, n);
    MatMap Y(y.data(), m, n);
    Y.noalias() = A * B;
  }
  check_finite(y, "matmul");
  if (should_record({&a, &b})) {
    auto ai = a.impl();
    auto bi = b.impl();
    auto yi = y.impl();
    Tape::active().record({ai, bi}, yi, [ai, bi, yi, m, k, n] {
      ConstMatMap G(yi->grad.data(), m, n);
      ConstMatMap A(ai->data.data(), m, k), B(bi->data.data(), k, n);
      MatMap GA(grad_buffer(ai).data(), m, k);
      MatMap GB(grad_buffer(bi).data(), k, n);
      GA.noalias() += G * B.transpose();
      GB.noalias() += A.transpose() * G;
    });
  }
  return y;
}

namespace {

// Shared slice geometry for axis-wise ops: outer x axis x inner.
struct AxisGeom {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisGeom axis_geom(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) throw std::invalid_argument("axis out of range");
  AxisGeom g;
  for (int i = 0; i < axis; ++i) g.outer *= shape[static_cast<std::size_t>(i)];
  g.extent = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) g.inner *= shape[i];
  return g;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  const auto geom = axis_geom(a.shape(), axis);
  Tensor y = Tensor::zeros(a.shape());
  const double* x = a.data();
  double* out = y.data();
  for (std::int64_t o = 0; o < geom.outer; ++o) {
    for (std::int64_t i = 0; i < geom.inner; ++i) {
      const std::int64_t base = o * geom.extent * geom.inner + i;
      double mx = -HUGE_VAL;
      for (std::int64_t e = 0; e < geom.extent; ++e) mx = std::max(mx, x[base + e * geom.inner]);
      double sum = 0.0;
      for (std::int64_t e = 0; e < geom.extent; ++e) {
        double v = std::exp(x[base + e * geom.inner] - mx);
        out[base + e * geom.inner] = v;
        sum += v;
      }
      for (std::int64_t e = 0; e < geom.extent; ++e) out[base + e * geom.inner] /= sum;
    }
  }
  check_finite(y, "softmax");
  if (should_record({&a})) {
    auto ai = a.impl();
    auto yi = y.impl();
    Tape::active().record({ai}, yi, [ai, yi, geom] {
      auto& ga = grad_buffer(ai);
      const auto& g = yi->grad;
      const auto& yv = yi->data;
      for (std::int64_t o = 0; o < geom.outer; ++o) {
        for (std::int64_t i = 0; i < geom.inner; ++i) {
          const std::int64_t base = o * geom.extent * geom.inner + i;
          double dot = 0.0;
          for (std::int64_t e = 0; e < geom.extent; ++e) {
            const auto idx = static_cast<std::size_t>(base + e * geom.inner);
            dot += g[idx] * yv[idx];
          }
          for (std::int64_t e = 0; e < geom.extent; ++e) {
            const auto idx = static_cast<std::size_t>(base + e * geom.inner);
            ga[idx] += yv[idx] * (g[idx] - dot);
          }
        }
      }
    });
  }
  return y;
}

Tensor log_softmax(const Tensor& a, int axis) {
  const auto geom = axis_geom(a.shape(), axis);
  Tensor y = Tensor::zeros(a.shape());
  const double* x = a.data();
  double* out = y.data();
  for (std::int64_t o = 0; o < geom.outer; ++o) {
    for (std::int64_t i = 0; i < geom.inner; ++i) {
      const std::int64_t base = o * geom.extent * geom.inner + i;
      double mx = -HUGE_VAL;
      for (std::int64_t e = 0; e < geom.extent; ++e) mx = std::max(mx, x[base + e * geom.inner]);
      double sum = 0.0;
      for (std::int64_t e = 0; e < geom.extent; ++e) sum += std::exp(x[base + e * geom.inner] - mx);
      const double lse = mx + std::log(sum);
      for (std::int64_t e = 0; e < geom.extent; ++e) out[base + e * geom.inner] = x[base + e * geom.inner] - lse;
    }
  }
  check_finite(y, "log_softmax");
  if (should_record({&a})) {
    auto ai = a.impl();
    auto yi = y.impl();
    Tape::active().record({ai}, yi, [ai, yi, geom] {
      auto& ga = grad_buffer(ai);
      const auto& g = yi->grad;
      const auto& yv = yi->data;
      for (std::int64_t o = 0; o < geom.outer; ++o) {
        for (std::int64_t i = 0; i < geom.inner; ++i) {
          const std::int64_t base = o * geom.extent * geom.inner + i;
          double gsum = 0.0;
          for (std::int64_t e = 0; e < geom.extent; ++e) gsum += g[static_cast<std::size_t>(base + e * geom.inner)];
          for (std::int64_t e = 0; e < geom.extent; ++e) {
            const auto idx = static_cast<std::size_t>(base + e * geom.inner);
            ga[idx] += g[idx] - std::exp(yv[idx]) * gsum;
          }
        }
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::int64_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw std::invalid_argument("layer_norm: gamma/beta must match last extent " + std::to_string(d));
  }
  const std::int64_t rows = x.numel() / d;
  Tensor y = Tensor::zeros(x.shape());
  std::vector<double> mu(static_cast<std::size_t>(rows)), inv_sd(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double m = 0.0;
    for (std::int64_t j = 0; j < d; ++j) m += xr[j];
    m /= static_cast<double>(d);
    double v = 0.0;
    for (std::int64_t j = 0; j < d; ++j) v += (xr[j] - m) * (xr[j] - m);
    v /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(v + eps);
    mu[static_cast<std::size_t>(r)] = m;
    inv_sd[static_cast<std::size_t>(r)] = is;
    double* yr = y.data() + r * d;
    for (std::int64_t j = 0; j < d; ++j) yr[j] = gamma.data()[j] * (xr[j] - m) * is + beta.data()[j];
  }
  check_finite(y, "layer_norm");
  if (should_record({&x, &gamma, &beta})) {
    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    auto yi = y.impl();
    Tape::active().record({xi, gi, bi}, yi, [xi, gi, bi, yi, rows, d, mu, inv_sd] {
      auto& gx = grad_buffer(xi);
      auto& gg = grad_buffer(gi);
      auto& gb = grad_buffer(bi);
      const auto& g = yi->grad;
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = xi->data.data() + r * d;
        const double* gr = g.data() + r * d;
        const double m = mu[static_cast<std::size_t>(r)];
        const double is = inv_sd[static_cast<std::size_t>(r)];
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
          const double xh = (xr[j] - m) * is;
          const double dxh = gr[j] * gi->data[static_cast<std::size_t>(j)];
          sum_dxh += dxh;
          sum_dxh_xh += dxh * xh;
          gg[static_cast<std::size_t>(j)] += gr[j] * xh;
          gb[static_cast<std::size_t>(j)] += gr[j];
        }
        const double inv_n = 1.0 / static_cast<double>(d);
        for (std::int64_t j = 0; j < d; ++j) {
          const double xh = (xr[j] - m) * is;
          const double dxh = gr[j] * gi->data[static_cast<std::size_t>(j)];
          gx[static_cast<std::size_t>(r * d + j)] += is * (dxh - inv_n * sum_dxh - xh * inv_n * sum_dxh_xh);
        }
      }
    });
  }
  return y;
}

namespace {

struct ConvGeom {
  std::int64_t h, w, cin, kh, kw, cout, oh, ow;
  int stride, pad;
  PadMode mode;
};

std::int64_t conv_extent(std::int64_t n, std::int64_t k, int pad, int stride) {
  const std::int64_t num = n + 2 * pad - k;
  if (num < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  return num / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad, PadMode mode) {
  if (x.rank() != 3 || w.rank() != 4) {
    throw std::invalid_argument("conv2d: expected image [H,W,Cin] and kernel [kh,kw,Cin,Cout], got " +
                                shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  if (x.dim(2) != w.dim(2)) {
    throw std::invalid_argument("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(1), w.dim(3), 0, 0, stride, pad, mode};
  if (mode == PadMode::kReflect && (pad >= g.h || pad >= g.w)) {
    throw std::invalid_argument("conv2d: reflect pad too large for input");
  }
  g.oh = conv_extent(g.h, g.kh, pad, stride);
  g.ow = conv_extent(g.w, g.kw, pad, stride);
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != g.cout) throw std::invalid_argument("conv2d: bias length must equal Cout");

  // im2col: rows are output positions, columns the unrolled receptive field.
  const std::int64_t ksz = g.kh * g.kw * g.cin;
  std::vector<double> cols(static_cast<std::size_t>(g.oh * g.ow * ksz), 0.0);
  const PadResolver pr{g.h, g.w, pad, mode};
  for (std::int64_t oy = 0; oy < g.oh; ++oy) {
    for (std::int64_t ox = 0; ox < g.ow; ++ox) {
      double* row = cols.data() + (oy * g.ow + ox) * ksz;
      for (std::int64_t ky = 0; ky < g.kh; ++ky) {
        const std::int64_t sy = pr.row(oy * stride + ky);
        for (std::int64_t kx = 0; kx < g.kw; ++kx) {
          const std::int64_t sx = pr.col(ox * stride + kx);
          if (sy >= 0 && sx >= 0) {
            const double* src = x.data() + (sy * g.w + sx) * g.cin;
            std::copy(src, src + g.cin, row + (ky * g.kw + kx) * g.cin);
          }
        }
      }
    }
  }
  Tensor y = Tensor::zeros({g.oh, g.ow, g.cout});
  {
    ConstMatMap C(cols.data(), g.oh * g.ow, ksz), W(w.data(), ksz, g.cout);
    MatMap Y(y.data(), g.oh * g.ow, g.cout);
    Y.noalias() = C * W;
    if (has_bias) Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), g.cout);
  }
  check_finite(y, "conv2d");

  const bool rec = has_bias ? should_record({&x, &w, &bias}) : should_record({&x, &w});
  if (rec) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto yi = y.impl();
    std::vector<std::shared_ptr<TensorImpl>> inputs{xi, wi};
    std::shared_ptr<TensorImpl> bi;
    if (has_bias) {
      bi = bias.impl();
      inputs.push_back(bi);
    }
    auto saved_cols = std::make_shared<std::vector<double>>(std::move(cols));
    Tape::active().record(inputs, yi, [xi, wi, bi, yi, g, saved_cols, ksz] {
      ConstMatMap G(yi->grad.data(), g.oh * g.ow, g.cout);
      // Kernel gradient.
      {
        ConstMatMap C(saved_cols->data(), g.oh * g.ow, ksz);
        MatMap GW(grad_buffer(wi).data(), ksz, g.cout);
        GW.noalias() += C.transpose() * G;
      }
      if (bi) {
        auto& gb = grad_buffer(bi);
        for (std::int64_t r = 0; r < g.oh * g.ow; ++r)
          for (std::int64_t c = 0; c < g.cout; ++c) gb[static_cast<std::size_t>(c)] += G(r, c);
      }
      // Input gradient: dcols = G * W^T scattered back through the padding.
      std::vector<double> dcols(static_cast<std::size_t>(g.oh * g.ow * ksz));
      {
        ConstMatMap W(wi->data.data(), ksz, g.cout);
        MatMap DC(dcols.data(), g.oh * g.ow, ksz);
        DC.noalias() = G * W.transpose();
      }
      auto& gx = grad_buffer(xi);
      const PadResolver pr{g.h, g.w, g.pad, g.mode};
      for (std::int64_t oy = 0; oy < g.oh; ++oy) {
        for (std::int64_t ox = 0; ox < g.ow; ++ox) {
          const double* row = dcols.data() + (oy * g.ow + ox) * ksz;
          for (std::int64_t ky = 0; ky < g.kh; ++ky) {
            const std::int64_t sy = pr.row(oy * g.stride + ky);
            if (sy < 0) continue;
            for (std::int64_t kx = 0; kx < g.kw; ++kx) {
              const std::int64_t sx = pr.col(ox * g.stride + kx);
              if (sx < 0) continue;
              double* dst = gx.data() + (sy * g.w + sx) * g.cin;
              const double* src = row + (ky * g.kw + kx) * g.cin;
              for (std::int64_t c = 0; c < g.cin; ++c) dst[c] += src[c];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad, PadMode mode) {
  return conv2d(x, w, Tensor(), stride, pad, mode);
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad, PadMode mode) {
  if (x.rank() != 3 || w.rank() != 3 || x.dim(2) != w.dim(2)) {
    throw std::invalid_argument("depthwise_conv2d: expected [H,W,C] and [kh,kw,C], got " + shape_str(x.shape()) +
                                " and " + shape_str(w.shape()));
  }
  const std::int64_t h = x.dim(0), wd = x.dim(1), c = x.dim(2), kh = w.dim(0), kw = w.dim(1);
  const std::int64_t oh = conv_extent(h, kh, pad, stride), ow = conv_extent(wd, kw, pad, stride);
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != c) throw std::invalid_argument("depthwise_conv2d: bias length must equal C");
  Tensor y = Tensor::zeros({oh, ow, c});
  const PadResolver pr{h, wd, pad, mode};
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      double* out = y.data() + (oy * ow + ox) * c;
      for (std::int64_t ky = 0; ky < kh; ++ky) {
        const std::int64_t sy = pr.row(oy * stride + ky);
        if (sy < 0) continue;
        for (std::int64_t kx = 0; kx < kw; ++kx) {
          const std::int64_t sx = pr.col(ox * stride + kx);
          if (sx < 0) continue;
          const double* src = x.data() + (sy * wd + sx) * c;
          const double* ker = w.data() + (ky * kw + kx) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) out[ch] += src[ch] * ker[ch];
        }
      }
      if (has_bias) {
        for (std::int64_t ch = 0; ch < c; ++ch) out[ch] += bias.data()[ch];
      }
    }
  }
  check_finite(y, "depthwise_conv2d");
  const bool rec = has_bias ? should_record({&x, &w, &bias}) : should_record({&x, &w});
  if (rec) {
    auto xi = x.impl();
    auto wi = w.impl();
    auto yi = y.impl();
    std::vector<std::shared_ptr<TensorImpl>> inputs{xi, wi};
    std::shared_ptr<TensorImpl> bi;
    if (has_bias) {
      bi = bias.impl();
      inputs.push_back(bi);
    }
    const int stride_c = stride, pad_c = pad;
    const PadMode mode_c = mode;
    Tape::active().record(inputs, yi, [xi, wi, bi, yi, h, wd, c, kh, kw, oh, ow, stride_c, pad_c, mode_c] {
      auto& gx = grad_buffer(xi);
      auto& gw = grad_buffer(wi);
      const auto& g = yi->grad;
      const PadResolver pr{h, wd, pad_c, mode_c};
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const double* gout = g.data() + (oy * ow + ox) * c;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            const std::int64_t sy = pr.row(oy * stride_c + ky);
            if (sy < 0) continue;
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              const std::int64_t sx = pr.col(ox * stride_c + kx);
              if (sx < 0) continue;
              const double* src = xi->data.data() + (sy * wd + sx) * c;
              const double* ker = wi->data.data() + (ky * kw + kx) * c;
              double* gsrc = gx.data() + (sy * wd + sx) * c;
              double* gker = gw.data() + (ky * kw + kx) * c;
              for (std::int64_t ch = 0; ch < c; ++ch) {
                gsrc[ch] += gout[ch] * ker[ch];
                gker[ch] += gout[ch] * src[ch];
              }
            }
          }
          if (bi) {
            auto& gb = grad_buffer(bi);
            for (std::int64_t ch = 0; ch < c; ++ch) gb[static_cast<std::size_t>(ch)] += gout[ch];
          }
        }
      }
    });
  }
  return y;
}

Tensor avg_pool2d(const Tensor& x, int k, int stride, int pad) {
  if (x.rank() != 3) throw std::invalid_argument("avg_pool2d: expected [H,W,C], got " + shape_str(x.shape()));
  if (k < 1 || stride < 1) throw std::invalid_argument("avg_pool2d: k and stride must be positive");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::int64_t oh = conv_extent(h, k, pad, stride), ow = conv_extent(w, k, pad, stride);
  Tensor y = Tensor::zeros({oh, ow, c});
  const double inv = 1.0 / (static_cast<double>(k) * static_cast<double>(k));
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      double* out = y.data() + (oy * ow + ox) * c;
      for (std::int64_t ky = 0; ky < k; ++ky) {
        const std::int64_t sy = oy * stride + ky - pad;
        if (sy < 0 || sy >= h) continue;
        for (std::int64_t kx = 0; kx < k; ++kx) {
          const std::int64_t sx = ox * stride + kx - pad;
          if (sx < 0 || sx >= w) continue;
          const double* src = x.data() + (sy * w + sx) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) out[ch] += src[ch];
        }
      }
      for (std::int64_t ch = 0; ch < c; ++ch) out[ch] *= inv;
    }
  }
  check_finite(y, "avg_pool2d");
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    const int k_c = k, s_c = stride, p_c = pad;
    Tape::active().record({xi}, yi, [xi, yi, h, w, c, oh, ow, k_c, s_c, p_c, inv] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const double* gout = g.data() + (oy * ow + ox) * c;
          for (std::int64_t ky = 0; ky < k_c; ++ky) {
            const std::int64_t sy = oy * s_c + ky - p_c;
            if (sy < 0 || sy >= h) continue;
            for (std::int64_t kx = 0; kx < k_c; ++kx) {
              const std::int64_t sx = ox * s_c + kx - p_c;
              if (sx < 0 || sx >= w) continue;
              double* dst = gx.data() + (sy * w + sx) * c;
              for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += gout[ch] * inv;
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor upsample_nearest2(const Tensor& x) {
  if (x.rank() != 3) throw std::invalid_argument("upsample_nearest2: expected [h,w,C]");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y = Tensor::zeros({2 * h, 2 * w, c});
  for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
    for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
      const double* src = x.data() + ((oy / 2) * w + (ox / 2)) * c;
      double* dst = y.data() + (oy * 2 * w + ox) * c;
      std::copy(src, src + c, dst);
    }
  }
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi, h, w, c] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      for (std::int64_t oy = 0; oy < 2 * h; ++oy) {
        for (std::int64_t ox = 0; ox < 2 * w; ++ox) {
          const double* gout = g.data() + (oy * 2 * w + ox) * c;
          double* dst = gx.data() + ((oy / 2) * w + (ox / 2)) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += gout[ch];
        }
      }
    });
  }
  return y;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum, double eps) {
  if (x.rank() != 3) throw std::invalid_argument("batch_norm: expected [H,W,C]");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c) {
    throw std::invalid_argument("batch_norm: parameter length must equal channel count");
  }
  const std::int64_t n = h * w;
  Tensor y = Tensor::zeros(x.shape());
  std::vector<double> mu(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
  if (training) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double m = 0.0;
      for (std::int64_t i = 0; i < n; ++i) m += x.data()[i * c + ch];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = x.data()[i * c + ch] - m;
        v += d * d;
      }
      v /= static_cast<double>(n);
      mu[static_cast<std::size_t>(ch)] = m;
      var[static_cast<std::size_t>(ch)] = v;
      // Running statistics use the population variance as well.
      running_mean.data()[ch] = (1.0 - momentum) * running_mean.data()[ch] + momentum * m;
      running_var.data()[ch] = (1.0 - momentum) * running_var.data()[ch] + momentum * v;
    }
  } else {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      mu[static_cast<std::size_t>(ch)] = running_mean.data()[ch];
      var[static_cast<std::size_t>(ch)] = running_var.data()[ch];
    }
  }
  std::vector<double> inv_sd(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch)
    inv_sd[static_cast<std::size_t>(ch)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(ch)] + eps);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto k = static_cast<std::size_t>(ch);
      y.data()[i * c + ch] = gamma.data()[ch] * (x.data()[i * c + ch] - mu[k]) * inv_sd[k] + beta.data()[ch];
    }
  }
  check_finite(y, "batch_norm");
  if (should_record({&x, &gamma, &beta})) {
    auto xi = x.impl();
    auto gi = gamma.impl();
    auto bi = beta.impl();
    auto yi = y.impl();
    Tape::active().record({xi, gi, bi}, yi, [xi, gi, bi, yi, n, c, mu, inv_sd, training] {
      auto& gx = grad_buffer(xi);
      auto& gg = grad_buffer(gi);
      auto& gb = grad_buffer(bi);
      const auto& g = yi->grad;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto k = static_cast<std::size_t>(ch);
        const double is = inv_sd[k];
        const double m = mu[k];
        double sum_g = 0.0, sum_g_xh = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
          const double xh = (xi->data[static_cast<std::size_t>(i * c + ch)] - m) * is;
          const double gr = g[static_cast<std::size_t>(i * c + ch)];
          sum_g += gr;
          sum_g_xh += gr * xh;
        }
        gg[k] += sum_g_xh;
        gb[k] += sum_g;
        const double gam = gi->data[k];
        if (training) {
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::int64_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i * c + ch);
            const double xh = (xi->data[idx] - m) * is;
            gx[idx] += gam * is * (g[idx] - inv_n * sum_g - xh * inv_n * sum_g_xh);
          }
        } else {
          for (std::int64_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i * c + ch);
            gx[idx] += gam * is * g[idx];
          }
        }
      }
    });
  }
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = first;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != static_cast<int>(first.size())) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.dim(i) != first[static_cast<std::size_t>(i)]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(first));
      }
    }
    total += p.dim(axis);
  }
  out_shape[static_cast<std::size_t>(axis)] = total;
  const auto geom = axis_geom(out_shape, axis);
  Tensor y = Tensor::zeros(out_shape);
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::int64_t ext = p.dim(axis);
    for (std::int64_t o = 0; o < geom.outer; ++o) {
      const double* src = p.data() + o * ext * geom.inner;
      double* dst = y.data() + (o * geom.extent + off) * geom.inner;
      std::copy(src, src + ext * geom.inner, dst);
    }
    off += ext;
  }
  bool rec = false;
  for (const auto& p : parts) {
    if (should_record({&p})) rec = true;
  }
  if (rec) {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::vector<std::int64_t> exts;
    for (const auto& p : parts) {
      inputs.push_back(p.impl());
      exts.push_back(p.dim(axis));
    }
    auto yi = y.impl();
    Tape::active().record(inputs, yi, [inputs, yi, geom, offsets, exts] {
      const auto& g = yi->grad;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& gp = grad_buffer(inputs[k]);
        for (std::int64_t o = 0; o < geom.outer; ++o) {
          const double* src = g.data() + (o * geom.extent + offsets[k]) * geom.inner;
          double* dst = gp.data() + o * exts[k] * geom.inner;
          for (std::int64_t i = 0; i < exts[k] * geom.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return y;
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len) {
  const auto geom = axis_geom(x.shape(), axis);
  if (start < 0 || len <= 0 || start + len > geom.extent) {
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                                ") out of extent " + std::to_string(geom.extent));
  }
  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor y = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < geom.outer; ++o) {
    const double* src = x.data() + (o * geom.extent + start) * geom.inner;
    double* dst = y.data() + o * len * geom.inner;
    std::copy(src, src + len * geom.inner, dst);
  }
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi, geom, start, len] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      for (std::int64_t o = 0; o < geom.outer; ++o) {
        const double* src = g.data() + o * len * geom.inner;
        double* dst = gx.data() + (o * geom.extent + start) * geom.inner;
        for (std::int64_t i = 0; i < len * geom.inner; ++i) dst[i] += src[i];
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
  }
  Tensor y(new_shape, x.values());
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return y;
}

Tensor transpose(const Tensor& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) throw std::invalid_argument("transpose: perm rank mismatch");
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  Shape out_shape(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int p = perm[static_cast<std::size_t>(i)];
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)]) throw std::invalid_argument("transpose: bad perm");
    seen[static_cast<std::size_t>(p)] = true;
    out_shape[static_cast<std::size_t>(i)] = x.dim(p);
  }
  // Strides of the source, walked in permuted order.
  std::vector<std::int64_t> src_strides(static_cast<std::size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i)
    src_strides[static_cast<std::size_t>(i)] = src_strides[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
  std::vector<std::int64_t> walk(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) walk[static_cast<std::size_t>(i)] = src_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];

  const std::int64_t n = x.numel();
  Tensor y = Tensor::zeros(out_shape);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  for (std::int64_t flat = 0; flat < n; ++flat) {
    std::int64_t src = 0;
    for (int i = 0; i < r; ++i) src += idx[static_cast<std::size_t>(i)] * walk[static_cast<std::size_t>(i)];
    y.data()[flat] = x.data()[src];
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < out_shape[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi, out_shape, walk, r, n] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
      for (std::int64_t flat = 0; flat < n; ++flat) {
        std::int64_t src = 0;
        for (int i = 0; i < r; ++i) src += idx[static_cast<std::size_t>(i)] * walk[static_cast<std::size_t>(i)];
        gx[static_cast<std::size_t>(src)] += g[static_cast<std::size_t>(flat)];
        for (int i = r - 1; i >= 0; --i) {
          if (++idx[static_cast<std::size_t>(i)] < out_shape[static_cast<std::size_t>(i)]) break;
          idx[static_cast<std::size_t>(i)] = 0;
        }
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor y = Tensor::scalar(s);
  check_finite(y, "sum");
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi] {
      auto& gx = grad_buffer(xi);
      const double g = yi->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_axis(const Tensor& x, int axis) {
  const auto geom = axis_geom(x.shape(), axis);
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor y = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < geom.outer; ++o) {
    for (std::int64_t e = 0; e < geom.extent; ++e) {
      const double* src = x.data() + (o * geom.extent + e) * geom.inner;
      double* dst = y.data() + o * geom.inner;
      for (std::int64_t i = 0; i < geom.inner; ++i) dst[i] += src[i];
    }
  }
  check_finite(y, "sum_axis");
  if (should_record({&x})) {
    auto xi = x.impl();
    auto yi = y.impl();
    Tape::active().record({xi}, yi, [xi, yi, geom] {
      auto& gx = grad_buffer(xi);
      const auto& g = yi->grad;
      for (std::int64_t o = 0; o < geom.outer; ++o) {
        for (std::int64_t e = 0; e < geom.extent; ++e) {
          double* dst = gx.data() + (o * geom.extent + e) * geom.inner;
          const double* src = g.data() + o * geom.inner;
          for (std::int64_t i = 0; i < geom.inner; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return y;
}

Tensor mean_axis(const Tensor& x, int axis) {
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw std::invalid_argument("cosine_similarity: length mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  double na = 0.0, nb = 0.0;
  for (double v : a.values()) na += v * v;
  for (double v : b.values()) nb += v * v;
  if (na == 0.0 || nb == 0.0) {
    throw std::runtime_error("cosine_similarity: zero-norm vector (degenerate projection)");
  }
  Tensor af = reshape(a, {a.numel()});
  Tensor bf = reshape(b, {b.numel()});
  Tensor dot = sum(mul(af, bf));
  Tensor denom = sqrt(mul(sum(mul(af, af)), sum(mul(bf, bf))));
  return div(dot, denom);
}

Tensor cross_entropy(const Tensor& logits, int label) {
  if (logits.rank() != 1) throw std::invalid_argument("cross_entropy: expected rank-1 logits");
  if (label < 0 || label >= logits.dim(0)) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range [0," +
                                std::to_string(logits.dim(0)) + ")");
  }
  Tensor ls = log_softmax(logits, 0);
  return neg(reshape(slice(ls, 0, label, 1), {1}));
}

}  // namespace rtgmff::num
