#include <algorithm>
#include <cmath>
#include <vector>

#include "ovseg/upsampler/jbu.hpp"

namespace ovseg::reference {
namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// LR value at HR position (i, j): bilinear sample at the half-pixel source
// coordinate, clamped to the map.
std::vector<double> sample_lr(const FeatureMap& lr, std::int64_t i, std::int64_t j) {
  const std::int64_t h = lr.dim(0), w = lr.dim(1), c = lr.dim(2);
  const double fy = std::clamp((i + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(h - 1));
  const double fx = std::clamp((j + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(w - 1));
  const auto y0 = static_cast<std::int64_t>(std::floor(fy)), x0 = static_cast<std::int64_t>(std::floor(fx));
  const auto y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ay = fy - y0, ax = fx - x0;
  std::vector<double> v(c);
  for (std::int64_t k = 0; k < c; ++k) {
    v[k] = (1 - ay) * (1 - ax) * lr.at(y0, x0, k) + (1 - ay) * ax * lr.at(y0, x1, k) +
           ay * (1 - ax) * lr.at(y1, x0, k) + ay * ax * lr.at(y1, x1, k);
  }
  return v;
}

std::vector<float> project(const Tensor& guidance, std::int64_t i, std::int64_t j, const JbuParams& p) {
  const std::int64_t g = p.guide_width();
  std::vector<double> hidden(g);
  for (std::int64_t o = 0; o < g; ++o) {
    double s = p.mlp_b1[o];
    for (std::int64_t k = 0; k < 3; ++k) s += guidance.at(i, j, k) * static_cast<double>(p.mlp_w1.at(k, o));
    hidden[o] = gelu(s);
  }
  std::vector<float> out(g);
  for (std::int64_t o = 0; o < g; ++o) {
    double s = p.mlp_b2[o];
    for (std::int64_t k = 0; k < g; ++k) s += hidden[k] * p.mlp_w2.at(k, o);
    out[o] = static_cast<float>(s);
  }
  return out;
}

}  // namespace

FeatureMap jbu_apply(const FeatureMap& lr, const Tensor& guidance, const JbuParams& p) {
  require_rank(lr, 3, "reference::jbu_apply");
  require_rank(guidance, 3, "reference::jbu_apply");
  const std::int64_t hh = guidance.dim(0), ww = guidance.dim(1), c = lr.dim(2);
  if (hh != 2 * lr.dim(0) || ww != 2 * lr.dim(1)) throw ShapeError("reference::jbu_apply: guidance must be 2x lr");
  const int r = p.radius;
  const std::int64_t edge = 2 * r + 1;

  std::vector<std::vector<float>> projected(hh * ww);
  std::vector<std::vector<double>> values(hh * ww);
  for (std::int64_t i = 0; i < hh; ++i)
    for (std::int64_t j = 0; j < ww; ++j) {
      projected[i * ww + j] = project(guidance, i, j, p);
      values[i * ww + j] = sample_lr(lr, i, j);
    }

  const Tensor ks = spatial_kernel(r, p.tau_spatial());
  FeatureMap out({hh, ww, c});
  Tensor window({edge * edge, p.guide_width()});
  for (std::int64_t i = 0; i < hh; ++i) {
    for (std::int64_t j = 0; j < ww; ++j) {
      std::vector<std::int64_t> src;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const auto y = std::clamp<std::int64_t>(i + dy, 0, hh - 1);
          const auto x = std::clamp<std::int64_t>(j + dx, 0, ww - 1);
          const auto& gn = projected[y * ww + x];
          std::copy(gn.begin(), gn.end(), window.ptr() + src.size() * gn.size());
          src.push_back(y * ww + x);
        }
      const Tensor kr = range_kernel(window, projected[i * ww + j], p.tau_range());
      double total = 0.0;
      for (std::int64_t s = 0; s < edge * edge; ++s) total += static_cast<double>(ks[s]) * kr[s];
      for (std::int64_t k = 0; k < c; ++k) {
        double acc = 0.0;
        for (std::int64_t s = 0; s < edge * edge; ++s) acc += static_cast<double>(ks[s]) * kr[s] * values[src[s]][k];
        out.at(i, j, k) = static_cast<float>(acc / total);
      }
    }
  }
  return out;
}

}  // namespace ovseg::reference
