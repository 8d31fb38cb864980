#pragma once

// SimFeatUp: one shared JBU stage applied log2(factor) times, plus the
// training-only content retention net and learnable downsampler.

#include <cstdint>
#include <string>

#include "ovseg/numeric/autodiff.hpp"
#include "ovseg/numeric/tensor.hpp"
#include "ovseg/upsampler/jbu.hpp"

namespace ovseg {

/// conv 3x3 (c -> m), GELU, conv 3x3 (m -> 3), Tanh. Replicate padding.
struct CrnParams {
  Tensor w1;  // 3 x 3 x c x m
  Tensor b1;  // m
  Tensor w2;  // 3 x 3 x m x 3
  Tensor b2;  // 3

  static CrnParams init(std::uint64_t seed, int channels, int hidden = 32);
  std::int64_t channels() const { return w1.dim(2); }
  std::int64_t hidden() const { return w1.dim(3); }

  ParamSet<float> to_params(const std::string& prefix = "crn.") const;
  static CrnParams from_params(const ParamSet<float>& params, const std::string& prefix = "crn.");
};

/// s x s blur whose weights are softmax(logits); stride = factor.
struct DownsamplerParams {
  Tensor logits;  // s x s
  int factor = 8;

  /// Zero logits, i.e. a uniform box filter. size 0 means size = factor.
  static DownsamplerParams init(int factor, int size = 0);
  std::int64_t size() const { return logits.dim(0); }
  Tensor kernel() const;

  ParamSet<float> to_params(const std::string& prefix = "down.") const;
  static DownsamplerParams from_params(const ParamSet<float>& params, int factor,
                                       const std::string& prefix = "down.");
};

struct SimFeatUpParams {
  JbuParams jbu;
  CrnParams crn;
  DownsamplerParams down;
  int factor = 8;

  /// channels: feature width c of the maps being upsampled.
  static SimFeatUpParams init(std::uint64_t seed, int channels, int factor, int guide_width = 16, int radius = 5,
                              int crn_hidden = 32);

  ParamSet<float> to_params() const;
  void assign(const ParamSet<float>& params);
};

/// Parameters a stack of independent JBU stages would need for `factor`.
std::int64_t jbu_stack_parameter_count(const JbuParams& p, int factor);

/// log2(factor); throws ArgumentError unless factor is a positive power of 2.
int upsample_stages(int factor);

template <typename T>
struct CrnVars {
  Var<T> w1, b1, w2, b2;
  static CrnVars from(const VarMap<T>& vars, const std::string& prefix = "crn.");
};

// -- graph forms -------------------------------------------------------------

/// lr: h x w x c; image: (h*factor) x (w*factor) x 3.
template <typename T>
Var<T> simfeatup_upsample(const Var<T>& lr, const Var<T>& image, const JbuVars<T>& p, int factor);

template <typename T>
Var<T> crn_reconstruct(const Var<T>& hr, const CrnVars<T>& p);

/// logits: s x s learnable kernel logits.
template <typename T>
Var<T> downsample(const Var<T>& hr, const Var<T>& logits, int factor);

// -- inference forms ---------------------------------------------------------

FeatureMap simfeatup_upsample(const FeatureMap& lr, const Tensor& image, const JbuParams& p, int factor);
Tensor crn_reconstruct(const FeatureMap& hr, const CrnParams& p);
FeatureMap downsample(const FeatureMap& hr, const DownsamplerParams& p);

}  // namespace ovseg
