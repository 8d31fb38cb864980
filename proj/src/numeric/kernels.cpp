#include "ovseg/numeric/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ovseg::kernels {
namespace {

// Parallel regions are skipped for tiny workloads; the per-element arithmetic
// is identical either way.
constexpr std::int64_t kParallelWork = 1 << 14;
constexpr std::int64_t kWideReduction = 4096;

std::string op_shapes(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b);
}

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

template <typename T>
void require_map(const BasicTensor<T>& t, const char* op) {
  if (t.rank() != 3) throw ShapeError(std::string(op) + ": expected H x W x C, got " + shape_string(t.shape()));
}

}  // namespace

std::int64_t pad_index(std::int64_t i, std::int64_t n, PadMode mode) noexcept {
  if (i >= 0 && i < n) return i;
  switch (mode) {
    case PadMode::kReplicate:
      return i < 0 ? 0 : n - 1;
    case PadMode::kZero:
      return -1;
    case PadMode::kReflect:
      if (n == 1) return 0;
      while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
      }
      return i;
  }
  return -1;
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) throw ShapeError(op_shapes("matmul", a.shape(), b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* pc = c.ptr();
  const bool wide = k > kWideReduction;
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    if (!wide) {
      for (std::int64_t p = 0; p < k; ++p) {
        const T aip = pa[i * k + p];
        const T* brow = pb + p * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    } else {
      std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
      for (std::int64_t p = 0; p < k; ++p) {
        const double aip = pa[i * k + p];
        const T* brow = pb + p * n;
        for (std::int64_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      for (std::int64_t j = 0; j < n; ++j) crow[j] = static_cast<T>(acc[j]);
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  if (a.dim(1) != b.dim(1)) throw ShapeError(op_shapes("matmul_bt", a.shape(), b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  BasicTensor<T> c({m, n});
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* pc = c.ptr();
  const bool wide = k > kWideReduction;
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = pa + i * k;
    for (std::int64_t j = 0; j < n; ++j) {
      const T* brow = pb + j * k;
      if (!wide) {
        T s = 0;
        for (std::int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        pc[i * n + j] = s;
      } else {
        double s = 0;
        for (std::int64_t p = 0; p < k; ++p) s += static_cast<double>(arow[p]) * brow[p];
        pc[i * n + j] = static_cast<T>(s);
      }
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> matmul_at(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_at");
  require_matrix(b, "matmul_at");
  if (a.dim(0) != b.dim(0)) throw ShapeError(op_shapes("matmul_at", a.shape(), b.shape()));
  const std::int64_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  const T* pa = a.ptr();
  const T* pb = b.ptr();
  T* pc = c.ptr();
  const bool wide = k > kWideReduction;
#pragma omp parallel for schedule(static) if (m * n * k > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    if (!wide) {
      for (std::int64_t p = 0; p < k; ++p) {
        const T api = pa[p * m + i];
        const T* brow = pb + p * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += api * brow[j];
      }
    } else {
      std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
      for (std::int64_t p = 0; p < k; ++p) {
        const double api = pa[p * m + i];
        const T* brow = pb + p * n;
        for (std::int64_t j = 0; j < n; ++j) acc[j] += api * brow[j];
      }
      for (std::int64_t j = 0; j < n; ++j) crow[j] = static_cast<T>(acc[j]);
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  auto y = matmul(x, w);
  if (bias.empty()) return y;
  return add_row(y, bias);
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_shapes("add", a.shape(), b.shape()));
  BasicTensor<T> c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_shapes("sub", a.shape(), b.shape()));
  BasicTensor<T> c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_shapes("mul", a.shape(), b.shape()));
  BasicTensor<T> c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * s;
  return c;
}

template <typename T>
BasicTensor<T> add_row(const BasicTensor<T>& x, const BasicTensor<T>& row) {
  const std::int64_t n = x.shape().back();
  if (static_cast<std::int64_t>(row.size()) != n) throw ShapeError(op_shapes("add_row", x.shape(), row.shape()));
  BasicTensor<T> y = x;
  const std::int64_t rows = static_cast<std::int64_t>(x.size()) / n;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t j = 0; j < n; ++j) y[r * n + j] += row[j];
  return y;
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  const std::int64_t n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (std::int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  const std::int64_t n = static_cast<std::int64_t>(x.size());
  constexpr T inv_sqrt2 = T(0.70710678118654752440);
#pragma omp parallel for schedule(static) if (n > kParallelWork)
  for (std::int64_t i = 0; i < n; ++i) y[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * inv_sqrt2));
  return y;
}

template <typename T>
T gelu_grad(T x) noexcept {
  constexpr T inv_sqrt2 = T(0.70710678118654752440);
  constexpr T inv_sqrt2pi = T(0.39894228040143267794);
  return T(0.5) * (T(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
}

template <typename T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& x) {
  const std::int64_t n = x.shape().back();
  const std::int64_t rows = static_cast<std::int64_t>(x.size()) / n;
  BasicTensor<T> y(x.shape());
  const T* px = x.ptr();
  T* py = y.ptr();
#pragma omp parallel for schedule(static) if (rows * n > kParallelWork)
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* xr = px + r * n;
    T* yr = py + r * n;
    T mx = xr[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    const T inv = static_cast<T>(1.0 / total);
    for (std::int64_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  return y;
}

template <typename T>
LayerNormResult<T> layer_norm_rows(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                                   T eps) {
  const std::int64_t n = x.shape().back();
  if (!gamma.empty() && static_cast<std::int64_t>(gamma.size()) != n)
    throw ShapeError(op_shapes("layer_norm", x.shape(), gamma.shape()));
  if (!beta.empty() && static_cast<std::int64_t>(beta.size()) != n)
    throw ShapeError(op_shapes("layer_norm", x.shape(), beta.shape()));
  const std::int64_t rows = static_cast<std::int64_t>(x.size()) / n;
  LayerNormResult<T> r{BasicTensor<T>(x.shape()), BasicTensor<T>(x.shape()), std::vector<T>(rows)};
#pragma omp parallel for schedule(static) if (rows * n > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    const T* xr = x.ptr() + i * n;
    double mean = 0.0;
    for (std::int64_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
    r.rstd[i] = static_cast<T>(rstd);
    T* nr = r.normalized.ptr() + i * n;
    T* orow = r.out.ptr() + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      nr[j] = static_cast<T>((xr[j] - mean) * rstd);
      const T g = gamma.empty() ? T(1) : gamma[j];
      const T b = beta.empty() ? T(0) : beta[j];
      orow[j] = nr[j] * g + b;
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> pad2d(const BasicTensor<T>& x, int top, int bottom, int left, int right, PadMode mode) {
  require_map(x, "pad2d");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("pad2d: negative padding");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::int64_t oh = h + top + bottom, ow = w + left + right;
  BasicTensor<T> y({oh, ow, c});
#pragma omp parallel for schedule(static) if (oh * ow * c > kParallelWork)
  for (std::int64_t i = 0; i < oh; ++i) {
    const std::int64_t si = pad_index(i - top, h, mode);
    for (std::int64_t j = 0; j < ow; ++j) {
      const std::int64_t sj = pad_index(j - left, w, mode);
      T* dst = y.ptr() + (i * ow + j) * c;
      if (si < 0 || sj < 0) continue;
      const T* src = x.ptr() + (si * w + sj) * c;
      std::copy(src, src + c, dst);
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> pad2d_adjoint(const BasicTensor<T>& grad_padded, const Shape& input_shape, int top, int left,
                             PadMode mode) {
  const std::int64_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
  const std::int64_t oh = grad_padded.dim(0), ow = grad_padded.dim(1);
  BasicTensor<T> gx(input_shape);
  for (std::int64_t i = 0; i < oh; ++i) {
    const std::int64_t si = pad_index(i - top, h, mode);
    if (si < 0) continue;
    for (std::int64_t j = 0; j < ow; ++j) {
      const std::int64_t sj = pad_index(j - left, w, mode);
      if (sj < 0) continue;
      const T* src = grad_padded.ptr() + (i * ow + j) * c;
      T* dst = gx.ptr() + (si * w + sj) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
    }
  }
  return gx;
}

template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& padded, int kh, int kw, int stride) {
  require_map(padded, "im2col");
  const std::int64_t h = padded.dim(0), w = padded.dim(1), c = padded.dim(2);
  if (h < kh || w < kw) throw ShapeError("im2col: kernel larger than padded input " + shape_string(padded.shape()));
  const std::int64_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::int64_t cols = static_cast<std::int64_t>(kh) * kw * c;
  BasicTensor<T> out({oh * ow, cols});
#pragma omp parallel for schedule(static) if (oh * ow * cols > kParallelWork)
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      T* dst = out.ptr() + (oy * ow + ox) * cols;
      for (int ky = 0; ky < kh; ++ky) {
        const T* src = padded.ptr() + ((oy * stride + ky) * w + ox * stride) * c;
        std::copy(src, src + static_cast<std::int64_t>(kw) * c, dst + static_cast<std::int64_t>(ky) * kw * c);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& padded_shape, int kh, int kw, int stride) {
  const std::int64_t h = padded_shape[0], w = padded_shape[1], c = padded_shape[2];
  const std::int64_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::int64_t ncols = static_cast<std::int64_t>(kh) * kw * c;
  BasicTensor<T> out(padded_shape);
  // Serial scatter keeps the summation order fixed.
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const T* src = cols.ptr() + (oy * ow + ox) * ncols;
      for (int ky = 0; ky < kh; ++ky) {
        T* dst = out.ptr() + ((oy * stride + ky) * w + ox * stride) * c;
        const T* s = src + static_cast<std::int64_t>(ky) * kw * c;
        for (std::int64_t t = 0; t < static_cast<std::int64_t>(kw) * c; ++t) dst[t] += s[t];
      }
    }
  return out;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias, int stride,
                      int pad, PadMode mode) {
  require_map(x, "conv2d");
  if (w.rank() != 4 || w.dim(2) != x.dim(2))
    throw ShapeError(op_shapes("conv2d", x.shape(), w.shape()));
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != w.dim(3))
    throw ShapeError(op_shapes("conv2d bias", w.shape(), bias.shape()));
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  const int kh = static_cast<int>(w.dim(0)), kw = static_cast<int>(w.dim(1));
  const auto padded = pad2d(x, pad, pad, pad, pad, mode);
  const std::int64_t oh = (padded.dim(0) - kh) / stride + 1, ow = (padded.dim(1) - kw) / stride + 1;
  const auto cols = im2col(padded, kh, kw, stride);
  auto y = linear(cols, w.reshaped({w.dim(0) * w.dim(1) * w.dim(2), w.dim(3)}), bias);
  return y.reshaped({oh, ow, w.dim(3)});
}

template <typename T>
BasicTensor<T> resize_bilinear(const BasicTensor<T>& x, std::int64_t oh, std::int64_t ow) {
  require_map(x, "resize_bilinear");
  if (oh <= 0 || ow <= 0) throw ShapeError("resize_bilinear: non-positive target size");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  BasicTensor<T> y({oh, ow, c});
  const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
#pragma omp parallel for schedule(static) if (oh * ow * c > kParallelWork)
  for (std::int64_t i = 0; i < oh; ++i) {
    const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::int64_t y0 = static_cast<std::int64_t>(fy);
    const std::int64_t y1 = std::min(y0 + 1, h - 1);
    const T ay = static_cast<T>(fy - y0);
    for (std::int64_t j = 0; j < ow; ++j) {
      const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::int64_t x0 = static_cast<std::int64_t>(fx);
      const std::int64_t x1 = std::min(x0 + 1, w - 1);
      const T ax = static_cast<T>(fx - x0);
      const T* p00 = x.ptr() + (y0 * w + x0) * c;
      const T* p01 = x.ptr() + (y0 * w + x1) * c;
      const T* p10 = x.ptr() + (y1 * w + x0) * c;
      const T* p11 = x.ptr() + (y1 * w + x1) * c;
      T* dst = y.ptr() + (i * ow + j) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const T top = p00[ch] + ax * (p01[ch] - p00[ch]);
        const T bot = p10[ch] + ax * (p11[ch] - p10[ch]);
        dst[ch] = top + ay * (bot - top);
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> resize_bilinear_adjoint(const BasicTensor<T>& grad_out, const Shape& input_shape) {
  const std::int64_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
  const std::int64_t oh = grad_out.dim(0), ow = grad_out.dim(1);
  BasicTensor<T> gx(input_shape);
  const double sy = static_cast<double>(h) / oh, sx = static_cast<double>(w) / ow;
  for (std::int64_t i = 0; i < oh; ++i) {
    const double fy = std::clamp((i + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::int64_t y0 = static_cast<std::int64_t>(fy);
    const std::int64_t y1 = std::min(y0 + 1, h - 1);
    const T ay = static_cast<T>(fy - y0);
    for (std::int64_t j = 0; j < ow; ++j) {
      const double fx = std::clamp((j + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::int64_t x0 = static_cast<std::int64_t>(fx);
      const std::int64_t x1 = std::min(x0 + 1, w - 1);
      const T ax = static_cast<T>(fx - x0);
      const T w00 = (T(1) - ay) * (T(1) - ax), w01 = (T(1) - ay) * ax;
      const T w10 = ay * (T(1) - ax), w11 = ay * ax;
      const T* g = grad_out.ptr() + (i * ow + j) * c;
      T* p00 = gx.ptr() + (y0 * w + x0) * c;
      T* p01 = gx.ptr() + (y0 * w + x1) * c;
      T* p10 = gx.ptr() + (y1 * w + x0) * c;
      T* p11 = gx.ptr() + (y1 * w + x1) * c;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        p00[ch] += w00 * g[ch];
        p01[ch] += w01 * g[ch];
        p10[ch] += w10 * g[ch];
        p11[ch] += w11 * g[ch];
      }
    }
  }
  return gx;
}

template <typename T>
BasicTensor<T> extract_windows(const BasicTensor<T>& x, int radius, PadMode mode) {
  require_map(x, "extract_windows");
  if (radius < 0) throw ShapeError("extract_windows: negative radius");
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::int64_t edge = 2 * radius + 1, k = edge * edge;
  BasicTensor<T> y({h, w, k, c});
#pragma omp parallel for schedule(static) if (h * w * k * c > kParallelWork)
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j)
      for (std::int64_t dy = -radius; dy <= radius; ++dy) {
        const std::int64_t si = pad_index(i + dy, h, mode);
        for (std::int64_t dx = -radius; dx <= radius; ++dx) {
          const std::int64_t sj = pad_index(j + dx, w, mode);
          const std::int64_t slot = (dy + radius) * edge + (dx + radius);
          T* dst = y.ptr() + ((i * w + j) * k + slot) * c;
          if (si < 0 || sj < 0) continue;
          const T* src = x.ptr() + (si * w + sj) * c;
          std::copy(src, src + c, dst);
        }
      }
  return y;
}

template <typename T>
BasicTensor<T> extract_windows_adjoint(const BasicTensor<T>& grad, const Shape& input_shape, int radius,
                                       PadMode mode) {
  const std::int64_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
  const std::int64_t edge = 2 * radius + 1, k = edge * edge;
  BasicTensor<T> gx(input_shape);
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j)
      for (std::int64_t dy = -radius; dy <= radius; ++dy) {
        const std::int64_t si = pad_index(i + dy, h, mode);
        for (std::int64_t dx = -radius; dx <= radius; ++dx) {
          const std::int64_t sj = pad_index(j + dx, w, mode);
          if (si < 0 || sj < 0) continue;
          const std::int64_t slot = (dy + radius) * edge + (dx + radius);
          const T* src = grad.ptr() + ((i * w + j) * k + slot) * c;
          T* dst = gx.ptr() + (si * w + sj) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
  return gx;
}

template <typename T>
BasicTensor<T> blur_downsample(const BasicTensor<T>& x, const BasicTensor<T>& kernel, int stride, int pad) {
  require_map(x, "blur_downsample");
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1))
    throw ShapeError("blur_downsample: kernel must be square, got " + shape_string(kernel.shape()));
  if (stride < 1) throw ShapeError("blur_downsample: stride must be positive");
  const int s = static_cast<int>(kernel.dim(0));
  const auto padded = pad2d(x, pad, pad, pad, pad, PadMode::kReplicate);
  const std::int64_t ph = padded.dim(0), pw = padded.dim(1), c = padded.dim(2);
  if (ph < s || pw < s) throw ShapeError("blur_downsample: kernel larger than input " + shape_string(x.shape()));
  const std::int64_t oh = (ph - s) / stride + 1, ow = (pw - s) / stride + 1;
  BasicTensor<T> y({oh, ow, c});
#pragma omp parallel for schedule(static) if (oh * ow * c * s * s > kParallelWork)
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      T* dst = y.ptr() + (oy * ow + ox) * c;
      for (int ky = 0; ky < s; ++ky)
        for (int kx = 0; kx < s; ++kx) {
          const T kv = kernel.at(ky, kx);
          const T* src = padded.ptr() + ((oy * stride + ky) * pw + ox * stride + kx) * c;
          for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += kv * src[ch];
        }
    }
  return y;
}

template <typename T>
double mse(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op_shapes("mse", a.shape(), b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

template <typename T>
double sum(const BasicTensor<T>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

#define OVSEG_INSTANTIATE_KERNELS(T)                                                                          \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                               \
  template BasicTensor<T> matmul_bt(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> matmul_at(const BasicTensor<T>&, const BasicTensor<T>&);                            \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                                    \
  template BasicTensor<T> add_row(const BasicTensor<T>&, const BasicTensor<T>&);                              \
  template BasicTensor<T> tanh(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                        \
  template BasicTensor<T> gelu(const BasicTensor<T>&);                                                        \
  template T gelu_grad(T) noexcept;                                                                           \
  template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                                \
  template LayerNormResult<T> layer_norm_rows(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                              const BasicTensor<T>&, T);                                      \
  template BasicTensor<T> pad2d(const BasicTensor<T>&, int, int, int, int, PadMode);                          \
  template BasicTensor<T> pad2d_adjoint(const BasicTensor<T>&, const Shape&, int, int, PadMode);              \
  template BasicTensor<T> im2col(const BasicTensor<T>&, int, int, int);                                       \
  template BasicTensor<T> col2im(const BasicTensor<T>&, const Shape&, int, int, int);                         \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int,    \
                                 int, PadMode);                                                               \
  template BasicTensor<T> resize_bilinear(const BasicTensor<T>&, std::int64_t, std::int64_t);                 \
  template BasicTensor<T> resize_bilinear_adjoint(const BasicTensor<T>&, const Shape&);                       \
  template BasicTensor<T> extract_windows(const BasicTensor<T>&, int, PadMode);                               \
  template BasicTensor<T> extract_windows_adjoint(const BasicTensor<T>&, const Shape&, int, PadMode);         \
  template BasicTensor<T> blur_downsample(const BasicTensor<T>&, const BasicTensor<T>&, int, int);            \
  template double mse(const BasicTensor<T>&, const BasicTensor<T>&);                                          \
  template double sum(const BasicTensor<T>&);

OVSEG_INSTANTIATE_KERNELS(float)
OVSEG_INSTANTIATE_KERNELS(double)

#undef OVSEG_INSTANTIATE_KERNELS

}  // namespace ovseg::kernels
