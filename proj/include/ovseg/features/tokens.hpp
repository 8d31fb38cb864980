#pragma once

#include <cstdint>
#include <span>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

/// (1 + h*w) x dim token matrix. Row 0 is the global token; rows 1..h*w
/// map row-major onto the h x w patch grid.
struct TokenSequence {
  Tensor tokens;
  int h = 0;
  int w = 0;

  std::int64_t dim() const { return tokens.dim(1); }
  std::int64_t count() const { return tokens.dim(0); }

  /// Throws ShapeError unless the token count equals 1 + h*w.
  void validate() const;

  std::span<const float> global_token() const { return tokens.data().subspan(0, static_cast<std::size_t>(dim())); }

  /// Patch rows reshaped into an h x w x dim feature map.
  FeatureMap patch_map() const;

  static TokenSequence from_parts(std::span<const float> global, const FeatureMap& patches);
};

}  // namespace ovseg
