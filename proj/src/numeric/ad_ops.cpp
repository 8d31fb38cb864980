#include "ovseg/numeric/ad_ops.hpp"

#include <cmath>

namespace ovseg::ad {
namespace k = ovseg::kernels;

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto& g = a.graph();
  return g.record(k::add(a.value(), b.value()), {a, b}, [a, b](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(a, go);
    gr.accumulate_grad(b, go);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto& g = a.graph();
  return g.record(k::sub(a.value(), b.value()), {a, b}, [a, b](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(a, go);
    if (gr.requires_grad(b)) gr.accumulate_grad(b, k::scale(go, T(-1)));
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto& g = a.graph();
  return g.record(k::mul(a.value(), b.value()), {a, b}, [a, b](Graph<T>& gr, const BasicTensor<T>& go) {
    if (gr.requires_grad(a)) gr.accumulate_grad(a, k::mul(go, b.value()));
    if (gr.requires_grad(b)) gr.accumulate_grad(b, k::mul(go, a.value()));
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return a.graph().record(k::scale(a.value(), s), {a}, [a, s](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(a, k::scale(go, s));
  });
}

template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& row) {
  return x.graph().record(k::add_row(x.value(), row.value()), {x, row},
                          [x, row](Graph<T>& gr, const BasicTensor<T>& go) {
                            gr.accumulate_grad(x, go);
                            if (!gr.requires_grad(row)) return;
                            const auto n = static_cast<std::int64_t>(row.value().size());
                            const auto rows = static_cast<std::int64_t>(go.size()) / n;
                            std::vector<double> acc(n, 0.0);
                            for (std::int64_t r = 0; r < rows; ++r)
                              for (std::int64_t j = 0; j < n; ++j) acc[j] += go[r * n + j];
                            BasicTensor<T> gr_row(row.value().shape());
                            for (std::int64_t j = 0; j < n; ++j) gr_row[j] = static_cast<T>(acc[j]);
                            gr.accumulate_grad(row, gr_row);
                          });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  return a.graph().record(k::matmul(a.value(), b.value()), {a, b}, [a, b](Graph<T>& gr, const BasicTensor<T>& go) {
    if (gr.requires_grad(a)) gr.accumulate_grad(a, k::matmul_bt(go, b.value()));
    if (gr.requires_grad(b)) gr.accumulate_grad(b, k::matmul_at(a.value(), go));
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  auto y = matmul(x, w);
  return bias.valid() ? add_row(y, bias) : y;
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  auto y = k::tanh(x.value());
  auto out = x.graph().record(y, {x}, [x, y](Graph<T>& gr, const BasicTensor<T>& go) {
    BasicTensor<T> gx(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] = go[i] * (T(1) - y[i] * y[i]);
    gr.accumulate_grad(x, gx);
  });
  return out;
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return x.graph().record(k::relu(x.value()), {x}, [x](Graph<T>& gr, const BasicTensor<T>& go) {
    BasicTensor<T> gx(go.shape());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] = xv[i] > T(0) ? go[i] : T(0);
    gr.accumulate_grad(x, gx);
  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  return x.graph().record(k::gelu(x.value()), {x}, [x](Graph<T>& gr, const BasicTensor<T>& go) {
    BasicTensor<T> gx(go.shape());
    const auto& xv = x.value();
    const auto n = static_cast<std::int64_t>(go.size());
#pragma omp parallel for schedule(static) if (n > (1 << 14))
    for (std::int64_t i = 0; i < n; ++i) gx[i] = go[i] * k::gelu_grad(xv[i]);
    gr.accumulate_grad(x, gx);
  });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x.value()[i]);
  return x.graph().record(y, {x}, [x, y](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(x, k::mul(go, y));
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  auto y = k::softmax_rows(x.value());
  return x.graph().record(y, {x}, [x, y](Graph<T>& gr, const BasicTensor<T>& go) {
    const auto n = y.shape().back();
    const auto rows = static_cast<std::int64_t>(y.size()) / n;
    BasicTensor<T> gx(y.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < n; ++j) dot += static_cast<double>(go[r * n + j]) * y[r * n + j];
      for (std::int64_t j = 0; j < n; ++j)
        gx[r * n + j] = y[r * n + j] * (go[r * n + j] - static_cast<T>(dot));
    }
    gr.accumulate_grad(x, gx);
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  auto res = k::layer_norm_rows(x.value(), gamma.value(), beta.value());
  auto xhat = res.normalized;
  auto rstd = res.rstd;
  return x.graph().record(
      std::move(res.out), {x, gamma, beta}, [x, gamma, beta, xhat, rstd](Graph<T>& gr, const BasicTensor<T>& go) {
        const auto n = xhat.shape().back();
        const auto rows = static_cast<std::int64_t>(xhat.size()) / n;
        const auto& gv = gamma.value();
        if (gr.requires_grad(gamma) || gr.requires_grad(beta)) {
          std::vector<double> dg(n, 0.0), db(n, 0.0);
          for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < n; ++j) {
              dg[j] += static_cast<double>(go[r * n + j]) * xhat[r * n + j];
              db[j] += go[r * n + j];
            }
          BasicTensor<T> tg(gv.shape()), tb(beta.value().shape());
          for (std::int64_t j = 0; j < n; ++j) {
            tg[j] = static_cast<T>(dg[j]);
            tb[j] = static_cast<T>(db[j]);
          }
          gr.accumulate_grad(gamma, tg);
          gr.accumulate_grad(beta, tb);
        }
        if (!gr.requires_grad(x)) return;
        BasicTensor<T> gx(xhat.shape());
        std::vector<T> dxhat(n);
        for (std::int64_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::int64_t j = 0; j < n; ++j) {
            dxhat[j] = go[r * n + j] * gv[j];
            m1 += dxhat[j];
            m2 += static_cast<double>(dxhat[j]) * xhat[r * n + j];
          }
          m1 /= static_cast<double>(n);
          m2 /= static_cast<double>(n);
          for (std::int64_t j = 0; j < n; ++j)
            gx[r * n + j] = rstd[r] * static_cast<T>(dxhat[j] - m1 - xhat[r * n + j] * m2);
        }
        gr.accumulate_grad(x, gx);
      });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  auto y = x.value().reshaped(std::move(shape));
  return x.graph().record(std::move(y), {x}, [x](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(x, go.reshaped(x.value().shape()));
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, std::int64_t begin, std::int64_t end) {
  const auto& v = x.value();
  if (v.rank() != 2 || begin < 0 || end > v.dim(0) || begin >= end)
    throw ShapeError("slice_rows: invalid range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") for " + shape_string(v.shape()));
  const auto cols = v.dim(1);
  std::vector<T> data(v.data().begin() + begin * cols, v.data().begin() + end * cols);
  BasicTensor<T> y({end - begin, cols}, std::move(data));
  return x.graph().record(std::move(y), {x}, [x, begin, cols](Graph<T>& gr, const BasicTensor<T>& go) {
    BasicTensor<T> gx(x.value().shape());
    std::copy(go.data().begin(), go.data().end(), gx.data().begin() + begin * cols);
    gr.accumulate_grad(x, gx);
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad, PadMode mode) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  if (xv.rank() != 3 || wv.rank() != 4 || wv.dim(2) != xv.dim(2))
    throw ShapeError("conv2d: incompatible shapes " + shape_string(xv.shape()) + " and " + shape_string(wv.shape()));
  const int kh = static_cast<int>(wv.dim(0)), kw = static_cast<int>(wv.dim(1));
  const auto padded = k::pad2d(xv, pad, pad, pad, pad, mode);
  const auto padded_shape = padded.shape();
  auto cols = k::im2col(padded, kh, kw, stride);
  const auto oh = (padded.dim(0) - kh) / stride + 1, ow = (padded.dim(1) - kw) / stride + 1;
  const Shape wm_shape{wv.dim(0) * wv.dim(1) * wv.dim(2), wv.dim(3)};
  const BasicTensor<T> empty;
  auto y = k::linear(cols, wv.reshaped(wm_shape), bias.valid() ? bias.value() : empty);
  const Shape out_shape{oh, ow, wv.dim(3)};
  return x.graph().record(
      y.reshaped(out_shape), {x, w, bias.valid() ? bias : w},
      [=, cols = std::move(cols)](Graph<T>& gr, const BasicTensor<T>& go) {
        const auto dy = go.reshaped({oh * ow, wm_shape[1]});
        if (gr.requires_grad(w)) gr.accumulate_grad(w, k::matmul_at(cols, dy).reshaped(w.value().shape()));
        if (bias.valid() && gr.requires_grad(bias)) {
          const auto n = wm_shape[1];
          std::vector<double> acc(n, 0.0);
          for (std::int64_t r = 0; r < oh * ow; ++r)
            for (std::int64_t j = 0; j < n; ++j) acc[j] += dy[r * n + j];
          BasicTensor<T> gb(bias.value().shape());
          for (std::int64_t j = 0; j < n; ++j) gb[j] = static_cast<T>(acc[j]);
          gr.accumulate_grad(bias, gb);
        }
        if (gr.requires_grad(x)) {
          const auto dcols = k::matmul_bt(dy, w.value().reshaped(wm_shape));
          const auto dpadded = k::col2im(dcols, padded_shape, kh, kw, stride);
          gr.accumulate_grad(x, k::pad2d_adjoint(dpadded, x.value().shape(), pad, pad, mode));
        }
      });
}

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, std::int64_t oh, std::int64_t ow) {
  return x.graph().record(k::resize_bilinear(x.value(), oh, ow), {x}, [x](Graph<T>& gr, const BasicTensor<T>& go) {
    gr.accumulate_grad(x, k::resize_bilinear_adjoint(go, x.value().shape()));
  });
}

template <typename T>
Var<T> pad2d(const Var<T>& x, int top, int bottom, int left, int right, PadMode mode) {
  return x.graph().record(k::pad2d(x.value(), top, bottom, left, right, mode), {x},
                          [x, top, left, mode](Graph<T>& gr, const BasicTensor<T>& go) {
                            gr.accumulate_grad(x, k::pad2d_adjoint(go, x.value().shape(), top, left, mode));
                          });
}

template <typename T>
Var<T> extract_windows(const Var<T>& x, int radius, PadMode mode) {
  return x.graph().record(k::extract_windows(x.value(), radius, mode), {x},
                          [x, radius, mode](Graph<T>& gr, const BasicTensor<T>& go) {
                            gr.accumulate_grad(x, k::extract_windows_adjoint(go, x.value().shape(), radius, mode));
                          });
}

template <typename T>
Var<T> blur_downsample(const Var<T>& x, const Var<T>& kernel, int stride, int pad) {
  auto y = k::blur_downsample(x.value(), kernel.value(), stride, pad);
  return x.graph().record(std::move(y), {x, kernel}, [x, kernel, stride, pad](Graph<T>& gr, const BasicTensor<T>& go) {
    const auto padded = k::pad2d(x.value(), pad, pad, pad, pad, PadMode::kReplicate);
    const auto& kv = kernel.value();
    const int s = static_cast<int>(kv.dim(0));
    const auto pw = padded.dim(1), c = padded.dim(2);
    const auto oh = go.dim(0), ow = go.dim(1);
    if (gr.requires_grad(kernel)) {
      BasicTensor<T> gk(kv.shape());
      const std::int64_t taps = static_cast<std::int64_t>(s) * s;
#pragma omp parallel for schedule(static) if (taps * oh * ow * c > (1 << 14))
      for (std::int64_t t = 0; t < taps; ++t) {
        const std::int64_t ky = t / s, kx = t % s;
        double acc = 0.0;
        for (std::int64_t oy = 0; oy < oh; ++oy)
          for (std::int64_t ox = 0; ox < ow; ++ox) {
            const T* src = padded.ptr() + ((oy * stride + ky) * pw + ox * stride + kx) * c;
            const T* g = go.ptr() + (oy * ow + ox) * c;
            for (std::int64_t ch = 0; ch < c; ++ch) acc += static_cast<double>(g[ch]) * src[ch];
          }
        gk[t] = static_cast<T>(acc);
      }
      gr.accumulate_grad(kernel, gk);
    }
    if (gr.requires_grad(x)) {
      BasicTensor<T> gp(padded.shape());
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          const T* g = go.ptr() + (oy * ow + ox) * c;
          for (int ky = 0; ky < s; ++ky)
            for (int kx = 0; kx < s; ++kx) {
              const T kval = kv.at(ky, kx);
              T* dst = gp.ptr() + ((oy * stride + ky) * pw + ox * stride + kx) * c;
              for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += kval * g[ch];
            }
        }
      gr.accumulate_grad(x, k::pad2d_adjoint(gp, x.value().shape(), pad, pad, PadMode::kReplicate));
    }
  });
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  const double m = k::mse(a.value(), b.value());
  return a.graph().record(BasicTensor<T>::scalar(static_cast<T>(m)), {a, b},
                          [a, b](Graph<T>& gr, const BasicTensor<T>& go) {
                            const auto& av = a.value();
                            const auto& bv = b.value();
                            const T coef = go[0] * T(2) / static_cast<T>(av.size());
                            BasicTensor<T> ga(av.shape());
                            for (std::size_t i = 0; i < av.size(); ++i) ga[i] = coef * (av[i] - bv[i]);
                            if (gr.requires_grad(b)) gr.accumulate_grad(b, k::scale(ga, T(-1)));
                            gr.accumulate_grad(a, ga);
                          });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  return x.graph().record(BasicTensor<T>::scalar(static_cast<T>(k::sum(x.value()))), {x},
                          [x](Graph<T>& gr, const BasicTensor<T>& go) {
                            gr.accumulate_grad(x, BasicTensor<T>(x.value().shape(), go[0]));
                          });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

#define OVSEG_INSTANTIATE_AD(T)                                                                         \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> scale(const Var<T>&, T);                                                              \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                                \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                  \
  template Var<T> tanh(const Var<T>&);                                                                  \
  template Var<T> relu(const Var<T>&);                                                                  \
  template Var<T> gelu(const Var<T>&);                                                                  \
  template Var<T> exp(const Var<T>&);                                                                   \
  template Var<T> softmax_rows(const Var<T>&);                                                          \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&);                              \
  template Var<T> reshape(const Var<T>&, Shape);                                                        \
  template Var<T> slice_rows(const Var<T>&, std::int64_t, std::int64_t);                                \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, PadMode);               \
  template Var<T> resize_bilinear(const Var<T>&, std::int64_t, std::int64_t);                           \
  template Var<T> pad2d(const Var<T>&, int, int, int, int, PadMode);                                    \
  template Var<T> extract_windows(const Var<T>&, int, PadMode);                                         \
  template Var<T> blur_downsample(const Var<T>&, const Var<T>&, int, int);                              \
  template Var<T> mse(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> sum(const Var<T>&);                                                                   \
  template Var<T> mean(const Var<T>&);

OVSEG_INSTANTIATE_AD(float)
OVSEG_INSTANTIATE_AD(double)

#undef OVSEG_INSTANTIATE_AD

}  // namespace ovseg::ad
