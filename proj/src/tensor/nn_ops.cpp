#include <algorithm>
#include <cmath>
#include <string>

#include "gds/errors.hpp"
#include "gds/tensor.hpp"

namespace gds {

namespace {

inline void axpy(double* __restrict y, const double* __restrict x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const double* __restrict x, const double* __restrict y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

struct ConvGeometry {
  int batch, channels, height, width;
  int kernels, kh, kw;
  int stride, pad;
  int out_h, out_w;

  std::size_t rows() const { return static_cast<std::size_t>(channels) * kh * kw; }
  std::size_t cols() const { return static_cast<std::size_t>(out_h) * out_w; }
  std::size_t in_plane() const { return static_cast<std::size_t>(channels) * height * width; }
  std::size_t out_plane() const { return static_cast<std::size_t>(kernels) * cols(); }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols[r][n], r = (c, i, j) kernel tap, n = output pixel.
void im2col(const ConvGeometry& g, const double* x, double* cols) {
  std::size_t r = 0;
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = x + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j, ++r) {
        double* dst = cols + r * g.cols();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          double* row = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(row, g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            row[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Transposed layout colsT[n][r], used for the weight gradient.
void im2col_transposed(const ConvGeometry& g, const double* x, double* cols_t) {
  const std::size_t rows = g.rows();
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      double* dst = cols_t + (static_cast<std::size_t>(oy) * g.out_w + ox) * rows;
      std::size_t r = 0;
      for (int c = 0; c < g.channels; ++c) {
        const double* plane = x + static_cast<std::size_t>(c) * g.height * g.width;
        for (int i = 0; i < g.kh; ++i) {
          const int iy = oy * g.stride - g.pad + i;
          for (int j = 0; j < g.kw; ++j, ++r) {
            const int ix = ox * g.stride - g.pad + j;
            dst[r] = (iy >= 0 && iy < g.height && ix >= 0 && ix < g.width)
                         ? plane[static_cast<std::size_t>(iy) * g.width + ix]
                         : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* x) {
  std::size_t r = 0;
  for (int c = 0; c < g.channels; ++c) {
    double* plane = x + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j, ++r) {
        const double* src = cols + r * g.cols();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + i;
          if (iy < 0 || iy >= g.height) continue;
          double* row = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + j;
            if (ix >= 0 && ix < g.width) row[ix] += src[static_cast<std::size_t>(oy) * g.out_w + ox];
          }
        }
      }
    }
  }
}

struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> w_lo, w_hi;
};

AxisTaps axis_taps(int in, int out, ResampleMode mode) {
  AxisTaps t;
  t.lo.resize(static_cast<std::size_t>(out));
  t.hi.resize(static_cast<std::size_t>(out));
  t.w_lo.resize(static_cast<std::size_t>(out));
  t.w_hi.resize(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (mode == ResampleMode::kNearest) {
      const int src = std::min(static_cast<int>(std::floor((i + 0.5) * scale)), in - 1);
      t.lo[k] = t.hi[k] = src;
      t.w_lo[k] = 1.0;
      t.w_hi[k] = 0.0;
    } else {
      const double src = std::max((i + 0.5) * scale - 0.5, 0.0);
      const int i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
      const int i1 = std::min(i0 + 1, in - 1);
      const double frac = src - i0;
      t.lo[k] = i0;
      t.hi[k] = i1;
      t.w_lo[k] = 1.0 - frac;
      t.w_hi[k] = frac;
    }
  }
  return t;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) throw ContractError("matmul: undefined tensor");
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                     shape_str(b.shape()));
  }
  const auto m = static_cast<std::size_t>(a.extent(0));
  const auto k = static_cast<std::size_t>(a.extent(1));
  const auto n = static_cast<std::size_t>(b.extent(1));
  const double* A = a.values().data();
  const double* B = b.values().data();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) axpy(c.data() + i * n, B + p * n, A[i * k + p], n);
  }
  return detail::make_result(
      "matmul", {static_cast<int>(m), static_cast<int>(n)}, std::move(c), {a, b},
      [m, k, n](const detail::BackwardContext& ctx) {
        const double* A = ctx.inputs[0]->data.data();
        const double* B = ctx.inputs[1]->data.data();
        const double* dC = ctx.grad_out.data();
        if (auto* ga = ctx.grad_in[0]) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) (*ga)[i * k + p] += dot(dC + i * n, B + p * n, n);
          }
        }
        if (auto* gb = ctx.grad_in[1]) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) axpy(gb->data() + p * n, dC + i * n, A[i * k + p], n);
          }
        }
      });
}

int conv_output_extent(int in, int kernel, int stride, int pad) {
  if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
  if (pad < 0) throw ParameterError("conv2d: pad must be >= 0");
  const int span = in + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("conv2d: kernel " + std::to_string(kernel) + " exceeds padded extent " +
                     std::to_string(in + 2 * pad));
  }
  if (span % stride > pad) {
    throw ShapeError("conv2d: output extent (" + std::to_string(in) + " + 2*" +
                     std::to_string(pad) + " - " + std::to_string(kernel) + ")/" +
                     std::to_string(stride) + " + 1 is not integral");
  }
  return span / stride + 1;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions options) {
  if (!x.defined() || !weight.defined()) throw ContractError("conv2d: undefined tensor");
  if (x.rank() != 4 || weight.rank() != 4 || weight.extent(1) != x.extent(1)) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (weight.extent(2) % 2 == 0 || weight.extent(3) % 2 == 0) {
    throw ShapeError("conv2d: kernel extents must be odd, got " + shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.extent(0) != weight.extent(0))) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  ConvGeometry g{x.extent(0),      x.extent(1),      x.extent(2),    x.extent(3),
                 weight.extent(0), weight.extent(2), weight.extent(3), options.stride,
                 options.pad,      0,                0};
  g.out_h = conv_output_extent(g.height, g.kh, g.stride, g.pad);
  g.out_w = conv_output_extent(g.width, g.kw, g.stride, g.pad);

  const std::size_t R = g.rows(), N = g.cols();
  const double* X = x.values().data();
  const double* W = weight.values().data();
  std::vector<double> out(static_cast<std::size_t>(g.batch) * g.out_plane());
  std::vector<double> cols(g.pointwise() ? 0 : R * N);
  for (int b = 0; b < g.batch; ++b) {
    const double* xb = X + static_cast<std::size_t>(b) * g.in_plane();
    const double* cb = xb;
    if (!g.pointwise()) {
      im2col(g, xb, cols.data());
      cb = cols.data();
    }
    double* ob = out.data() + static_cast<std::size_t>(b) * g.out_plane();
    for (int k = 0; k < g.kernels; ++k) {
      double* row = ob + static_cast<std::size_t>(k) * N;
      std::fill_n(row, N, has_bias ? bias.values()[static_cast<std::size_t>(k)] : 0.0);
      const double* wk = W + static_cast<std::size_t>(k) * R;
      for (std::size_t r = 0; r < R; ++r) axpy(row, cb + r * N, wk[r], N);
    }
  }

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(
      "conv2d", {g.batch, g.kernels, g.out_h, g.out_w}, std::move(out), std::move(inputs),
      [g, has_bias](const detail::BackwardContext& ctx) {
        const std::size_t R = g.rows(), N = g.cols();
        const double* X = ctx.inputs[0]->data.data();
        const double* W = ctx.inputs[1]->data.data();
        auto* gx = ctx.grad_in[0];
        auto* gw = ctx.grad_in[1];
        auto* gb = has_bias ? ctx.grad_in[2] : nullptr;
        std::vector<double> cols_t(gw ? R * N : 0);
        std::vector<double> dcols(gx ? R * N : 0);
        for (int b = 0; b < g.batch; ++b) {
          const double* dy = ctx.grad_out.data() + static_cast<std::size_t>(b) * g.out_plane();
          if (gb) {
            for (int k = 0; k < g.kernels; ++k) {
              double s = 0.0;
              for (std::size_t n = 0; n < N; ++n) s += dy[static_cast<std::size_t>(k) * N + n];
              (*gb)[static_cast<std::size_t>(k)] += s;
            }
          }
          if (gw) {
            im2col_transposed(g, X + static_cast<std::size_t>(b) * g.in_plane(), cols_t.data());
            for (int k = 0; k < g.kernels; ++k) {
              double* gwk = gw->data() + static_cast<std::size_t>(k) * R;
              const double* dyk = dy + static_cast<std::size_t>(k) * N;
              for (std::size_t n = 0; n < N; ++n) axpy(gwk, cols_t.data() + n * R, dyk[n], R);
            }
          }
          if (gx) {
            double* gxb = gx->data() + static_cast<std::size_t>(b) * g.in_plane();
            double* dst = g.pointwise() ? gxb : dcols.data();
            if (!g.pointwise()) std::fill(dcols.begin(), dcols.end(), 0.0);
            for (int k = 0; k < g.kernels; ++k) {
              const double* wk = W + static_cast<std::size_t>(k) * R;
              const double* dyk = dy + static_cast<std::size_t>(k) * N;
              for (std::size_t r = 0; r < R; ++r) axpy(dst + r * N, dyk, wk[r], N);
            }
            if (!g.pointwise()) col2im_add(g, dcols.data(), gxb);
          }
        }
      });
}

Tensor resample(const Tensor& x, int target_h, int target_w, ResampleMode mode) {
  if (!x.defined()) throw ContractError("resample: undefined tensor");
  if (x.rank() != 4) throw ShapeError("resample: expected rank-4 input, got " + shape_str(x.shape()));
  if (target_h < 1 || target_w < 1) {
    throw ShapeError("resample: target extents must be >= 1, got " + std::to_string(target_h) +
                     "x" + std::to_string(target_w));
  }
  const int B = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
  if (H == target_h && W == target_w) return reshape(x, x.shape());

  const AxisTaps ty = axis_taps(H, target_h, mode);
  const AxisTaps tx = axis_taps(W, target_w, mode);
  const std::size_t planes = static_cast<std::size_t>(B) * C;
  const std::size_t in_plane = static_cast<std::size_t>(H) * W;
  const std::size_t out_plane = static_cast<std::size_t>(target_h) * target_w;
  auto in = x.values();
  std::vector<double> out(planes * out_plane);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = in.data() + p * in_plane;
    double* dst = out.data() + p * out_plane;
    for (int oy = 0; oy < target_h; ++oy) {
      const auto ky = static_cast<std::size_t>(oy);
      const double* r0 = src + static_cast<std::size_t>(ty.lo[ky]) * W;
      const double* r1 = src + static_cast<std::size_t>(ty.hi[ky]) * W;
      for (int ox = 0; ox < target_w; ++ox) {
        const auto kx = static_cast<std::size_t>(ox);
        const double top = tx.w_lo[kx] * r0[tx.lo[kx]] + tx.w_hi[kx] * r0[tx.hi[kx]];
        const double bot = tx.w_lo[kx] * r1[tx.lo[kx]] + tx.w_hi[kx] * r1[tx.hi[kx]];
        dst[ky * target_w + kx] = ty.w_lo[ky] * top + ty.w_hi[ky] * bot;
      }
    }
  }
  return detail::make_result(
      mode == ResampleMode::kNearest ? "resample_nearest" : "resample_bilinear",
      {B, C, target_h, target_w}, std::move(out), {x},
      [ty, tx, planes, in_plane, out_plane, W, target_h, target_w](
          const detail::BackwardContext& ctx) {
        if (!ctx.grad_in[0]) return;
        auto& g = *ctx.grad_in[0];
        for (std::size_t p = 0; p < planes; ++p) {
          double* dsrc = g.data() + p * in_plane;
          const double* dout = ctx.grad_out.data() + p * out_plane;
          for (int oy = 0; oy < target_h; ++oy) {
            const auto ky = static_cast<std::size_t>(oy);
            double* r0 = dsrc + static_cast<std::size_t>(ty.lo[ky]) * W;
            double* r1 = dsrc + static_cast<std::size_t>(ty.hi[ky]) * W;
            for (int ox = 0; ox < target_w; ++ox) {
              const auto kx = static_cast<std::size_t>(ox);
              const double d = dout[ky * target_w + kx];
              const double top = ty.w_lo[ky] * d;
              const double bot = ty.w_hi[ky] * d;
              r0[tx.lo[kx]] += tx.w_lo[kx] * top;
              r0[tx.hi[kx]] += tx.w_hi[kx] * top;
              r1[tx.lo[kx]] += tx.w_lo[kx] * bot;
              r1[tx.hi[kx]] += tx.w_hi[kx] * bot;
            }
          }
        }
      });
}

}  // namespace gds
