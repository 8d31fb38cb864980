#pragma once

// Plain nested-loop versions of the library operators, written directly from
// their definitions and evaluated in double. Tests compare against these.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ovseg/numeric/rng.hpp"
#include "ovseg/numeric/tensor.hpp"
#include "ovseg/upsampler/jbu.hpp"

namespace oracle {

using ovseg::Tensor;

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t t = 0; t < k; ++t) s += static_cast<double>(a.at(i, t)) * b.at(t, j);
      c.at(i, j) = static_cast<float>(s);
    }
  return c;
}

inline Tensor softmax_rows(const Tensor& x) {
  const auto m = x.dim(0), n = x.dim(1);
  Tensor y({m, n});
  for (std::int64_t i = 0; i < m; ++i) {
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) total += std::exp(static_cast<double>(x.at(i, j)));
    for (std::int64_t j = 0; j < n; ++j) y.at(i, j) = static_cast<float>(std::exp(static_cast<double>(x.at(i, j))) / total);
  }
  return y;
}

/// softmax(a b^T / sqrt(d)) v for one head.
inline Tensor attention(const Tensor& a, const Tensor& b, const Tensor& v) {
  const auto n = a.dim(0), d = a.dim(1);
  Tensor logits({n, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::int64_t t = 0; t < d; ++t) s += static_cast<double>(a.at(i, t)) * b.at(j, t);
      logits.at(i, j) = static_cast<float>(s / std::sqrt(static_cast<double>(d)));
    }
  return matmul(softmax_rows(logits), v);
}

inline Tensor modulated_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  const Tensor a = attention(q, q, v), b = attention(k, k, v), c = attention(v, v, v);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i] + c[i];
  return out;
}

/// Convolution with replicate padding; weight (kh, kw, cin, cout).
inline Tensor conv2d_replicate(const Tensor& x, const Tensor& w, const Tensor& bias, int pad) {
  const auto h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const auto kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
  const auto oh = h + 2 * pad - kh + 1, ow = wd + 2 * pad - kw + 1;
  Tensor y({oh, ow, cout});
  for (std::int64_t i = 0; i < oh; ++i)
    for (std::int64_t j = 0; j < ow; ++j)
      for (std::int64_t o = 0; o < cout; ++o) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (std::int64_t p = 0; p < kh; ++p)
          for (std::int64_t q = 0; q < kw; ++q) {
            const auto yy = std::clamp<std::int64_t>(i + p - pad, 0, h - 1);
            const auto xx = std::clamp<std::int64_t>(j + q - pad, 0, wd - 1);
            for (std::int64_t c = 0; c < cin; ++c)
              s += static_cast<double>(x.at(yy, xx, c)) * w[((p * kw + q) * cin + c) * cout + o];
          }
        y.at(i, j, o) = static_cast<float>(s);
      }
  return y;
}

inline Tensor average_pool(const Tensor& x, int f) {
  const auto h = x.dim(0) / f, w = x.dim(1) / f, c = x.dim(2);
  Tensor y({h, w, c});
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j)
      for (std::int64_t k = 0; k < c; ++k) {
        double s = 0.0;
        for (int p = 0; p < f; ++p)
          for (int q = 0; q < f; ++q) s += x.at(i * f + p, j * f + q, k);
        y.at(i, j, k) = static_cast<float>(s / (f * f));
      }
  return y;
}

inline std::vector<double> range_weights(const Tensor& window, const std::vector<float>& centre, double tau) {
  std::vector<double> w(window.dim(0));
  double total = 0.0;
  for (std::int64_t i = 0; i < window.dim(0); ++i) {
    double dot = 0.0;
    for (std::int64_t j = 0; j < window.dim(1); ++j) dot += static_cast<double>(centre[j]) * window.at(i, j);
    w[i] = std::exp(dot / (tau * tau));
    total += w[i];
  }
  for (auto& x : w) x /= total;
  return w;
}

/// One JBU stage from the definition: bilinearly sample the LR map at
/// HR-coordinate/2, project the guidance per pixel through the MLP, and for
/// each HR pixel renormalise k_spatial * k_range over the clamped window.
inline Tensor jbu(const Tensor& lr, const Tensor& guide, const ovseg::JbuParams& p) {
  const auto h = lr.dim(0), w = lr.dim(1), c = lr.dim(2);
  const auto hh = 2 * h, ww = 2 * w, g = p.mlp_w2.dim(1);
  const int r = p.radius;
  const double ts = std::exp(static_cast<double>(p.log_tau_spatial[0]));
  const double tr = std::exp(static_cast<double>(p.log_tau_range[0]));

  std::vector<double> up(hh * ww * c), proj(hh * ww * g);
  for (std::int64_t i = 0; i < hh; ++i)
    for (std::int64_t j = 0; j < ww; ++j) {
      double sy = std::clamp((i + 0.5) / 2 - 0.5, 0.0, h - 1.0), sx = std::clamp((j + 0.5) / 2 - 0.5, 0.0, w - 1.0);
      const auto y0 = static_cast<std::int64_t>(sy), x0 = static_cast<std::int64_t>(sx);
      const auto y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double ay = sy - y0, ax = sx - x0;
      for (std::int64_t k = 0; k < c; ++k)
        up[(i * ww + j) * c + k] = (1 - ay) * ((1 - ax) * lr.at(y0, x0, k) + ax * lr.at(y0, x1, k)) +
                                   ay * ((1 - ax) * lr.at(y1, x0, k) + ax * lr.at(y1, x1, k));
      std::vector<double> hidden(g);
      for (std::int64_t o = 0; o < g; ++o) {
        double s = p.mlp_b1[o];
        for (int t = 0; t < 3; ++t) s += static_cast<double>(guide.at(i, j, t)) * p.mlp_w1.at(t, o);
        hidden[o] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
      }
      for (std::int64_t o = 0; o < g; ++o) {
        double s = p.mlp_b2[o];
        for (std::int64_t t = 0; t < g; ++t) s += hidden[t] * p.mlp_w2.at(t, o);
        proj[(i * ww + j) * g + o] = s;
      }
    }

  Tensor out({hh, ww, c});
  for (std::int64_t i = 0; i < hh; ++i)
    for (std::int64_t j = 0; j < ww; ++j) {
      std::vector<double> range, spatial;
      std::vector<std::int64_t> src;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const auto y = std::clamp<std::int64_t>(i + dy, 0, hh - 1), x = std::clamp<std::int64_t>(j + dx, 0, ww - 1);
          double dot = 0.0;
          for (std::int64_t t = 0; t < g; ++t) dot += proj[(i * ww + j) * g + t] * proj[(y * ww + x) * g + t];
          range.push_back(dot / (tr * tr));
          spatial.push_back(std::exp(-(dy * dy + dx * dx) / (2 * ts * ts)));
          src.push_back(y * ww + x);
        }
      const double mx = *std::max_element(range.begin(), range.end());
      double rsum = 0.0;
      for (auto& v : range) rsum += (v = std::exp(v - mx));
      double total = 0.0;
      for (std::size_t s = 0; s < range.size(); ++s) total += spatial[s] * range[s] / rsum;
      for (std::int64_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::size_t s = 0; s < range.size(); ++s) acc += spatial[s] * range[s] / rsum * up[src[s] * c + k];
        out.at(i, j, k) = static_cast<float>(acc / total);
      }
    }
  return out;
}

/// Per-class IoU by walking the pixels once per class.
inline std::vector<std::optional<double>> iou_by_enumeration(const std::vector<std::int32_t>& pred,
                                                             const std::vector<std::int32_t>& gt, int k) {
  std::vector<std::optional<double>> out(k);
  for (int c = 0; c < k; ++c) {
    std::uint64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool a = pred[i] == c, b = gt[i] == c;
      inter += a && b;
      uni += a || b;
    }
    if (uni > 0) out[c] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return out;
}

inline std::optional<double> miou_by_enumeration(const std::vector<std::int32_t>& pred,
                                                 const std::vector<std::int32_t>& gt, int k) {
  double s = 0.0;
  int n = 0;
  for (const auto& v : iou_by_enumeration(pred, gt, k))
    if (v) {
      s += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / n;
}

inline Tensor random_tensor(ovseg::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  ovseg::SplitMix64 rng(seed);
  return ovseg::uniform_tensor(std::move(shape), rng, lo, hi);
}

}  // namespace oracle
