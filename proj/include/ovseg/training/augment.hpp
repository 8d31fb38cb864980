#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

struct AugmentFlags {
  bool flip = true;
  bool translate = true;
  bool zoom = true;

  bool any() const { return flip || translate || zoom; }
};

struct AugmentParams {
  bool flip = false;
  int shift_y = 0;
  int shift_x = 0;
  double zoom = 1.0;  // > 1 zooms in
};

struct View {
  Tensor image;
  FeatureMap features;
};

using FeatureFn = std::function<FeatureMap(const Tensor&)>;

/// Draws one set of transform parameters. Shifts are at most `max_shift`
/// pixels per axis; zoom is uniform in [0.75, 1.25].
AugmentParams sample_augment(const AugmentFlags& flags, int max_shift, std::uint64_t seed);

/// Horizontal flip, then integer shift with replicate borders, then a
/// centred bilinear zoom. The output keeps the input size.
Tensor apply_augment(const Tensor& image, const AugmentParams& a);

Tensor flip_horizontal(const Tensor& image);

/// The identity view, plus one augmented view when any flag is set. Each
/// view's features come from running feat_fn on that view's image.
std::vector<View> augment_views(const Tensor& image, const FeatureFn& feat_fn, const AugmentFlags& flags,
                                std::uint64_t seed, int max_shift);

}  // namespace ovseg
