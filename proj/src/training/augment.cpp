#include "ovseg/training/augment.hpp"

#include <algorithm>
#include <cmath>

#include "ovseg/numeric/rng.hpp"

namespace ovseg {

AugmentParams sample_augment(const AugmentFlags& flags, int max_shift, std::uint64_t seed) {
  SplitMix64 rng(seed);
  AugmentParams a;
  // Always draw every value so enabling one flag does not shift the others.
  const bool flip = rng.below(2) == 1;
  const auto span = static_cast<std::uint64_t>(2 * std::max(max_shift, 0) + 1);
  const int sy = static_cast<int>(rng.below(span)) - max_shift;
  const int sx = static_cast<int>(rng.below(span)) - max_shift;
  const double zoom = rng.uniform(0.75, 1.25);
  if (flags.flip) a.flip = flip;
  if (flags.translate) {
    a.shift_y = sy;
    a.shift_x = sx;
  }
  if (flags.zoom) a.zoom = zoom;
  return a;
}

Tensor flip_horizontal(const Tensor& image) {
  require_rank(image, 3, "flip_horizontal");
  const std::int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out(image.shape());
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j)
      for (std::int64_t k = 0; k < c; ++k) out.at(i, j, k) = image.at(i, w - 1 - j, k);
  return out;
}

Tensor apply_augment(const Tensor& image, const AugmentParams& a) {
  require_rank(image, 3, "apply_augment");
  if (!(a.zoom > 0.0)) throw ArgumentError("apply_augment: zoom must be positive");
  const std::int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor x = a.flip ? flip_horizontal(image) : image;
  if (a.shift_y != 0 || a.shift_x != 0) {
    Tensor shifted(x.shape());
    for (std::int64_t i = 0; i < h; ++i) {
      const auto si = std::clamp<std::int64_t>(i - a.shift_y, 0, h - 1);
      for (std::int64_t j = 0; j < w; ++j) {
        const auto sj = std::clamp<std::int64_t>(j - a.shift_x, 0, w - 1);
        for (std::int64_t k = 0; k < c; ++k) shifted.at(i, j, k) = x.at(si, sj, k);
      }
    }
    x = std::move(shifted);
  }
  if (a.zoom != 1.0) {
    // Scale about the centre, then keep the original frame: a crop when
    // zooming in, replicate borders when zooming out.
    Tensor zoomed(x.shape());
    const double cy = h / 2.0, cx = w / 2.0;
    for (std::int64_t i = 0; i < h; ++i) {
      const double fy = std::clamp(cy + (i + 0.5 - cy) / a.zoom - 0.5, 0.0, static_cast<double>(h - 1));
      const auto y0 = static_cast<std::int64_t>(fy);
      const auto y1 = std::min(y0 + 1, h - 1);
      const double ay = fy - y0;
      for (std::int64_t j = 0; j < w; ++j) {
        const double fx = std::clamp(cx + (j + 0.5 - cx) / a.zoom - 0.5, 0.0, static_cast<double>(w - 1));
        const auto x0 = static_cast<std::int64_t>(fx);
        const auto x1 = std::min(x0 + 1, w - 1);
        const double ax = fx - x0;
        for (std::int64_t k = 0; k < c; ++k) {
          const double top = x.at(y0, x0, k) + ax * (x.at(y0, x1, k) - x.at(y0, x0, k));
          const double bot = x.at(y1, x0, k) + ax * (x.at(y1, x1, k) - x.at(y1, x0, k));
          zoomed.at(i, j, k) = static_cast<float>(top + ay * (bot - top));
        }
      }
    }
    x = std::move(zoomed);
  }
  return x;
}

std::vector<View> augment_views(const Tensor& image, const FeatureFn& feat_fn, const AugmentFlags& flags,
                                std::uint64_t seed, int max_shift) {
  std::vector<View> views;
  views.push_back({image, feat_fn(image)});
  if (flags.any()) {
    Tensor aug = apply_augment(image, sample_augment(flags, max_shift, seed));
    FeatureMap f = feat_fn(aug);
    views.push_back({std::move(aug), std::move(f)});
  }
  return views;
}

}  // namespace ovseg
