#pragma once

// Parameterised joint bilateral upsampling.
//
// For a high-resolution position c with window slots k (edge 2r+1, replicate
// clamping at borders) the weight is
//   k_spatial(k) * k_range(c, k) / sum_k' k_spatial(k') * k_range(c, k')
// with k_spatial(k) = exp(-|offset_k|^2 / (2 tau_s^2)) and k_range the
// softmax over the window of <MLP(G)_c, MLP(G)_k> / tau_r^2. Since k_range
// is itself a softmax, the product renormalises to a single softmax over
// <g_c, g_k> / tau_r^2 - |offset_k|^2 / (2 tau_s^2), which is what the
// parallel kernel evaluates.

#include <cstdint>
#include <span>
#include <string>

#include "ovseg/numeric/autodiff.hpp"
#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

struct JbuParams {
  Tensor mlp_w1;  // 3 x g
  Tensor mlp_b1;  // g
  Tensor mlp_w2;  // g x g
  Tensor mlp_b2;  // g
  Tensor log_tau_spatial;  // {1}
  Tensor log_tau_range;    // {1}
  int radius = 5;

  /// Guidance MLP weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero
  /// biases, tau_spatial = 2, tau_range = 1.
  static JbuParams init(std::uint64_t seed, int guide_width = 16, int radius = 5);

  float tau_spatial() const;
  float tau_range() const;
  std::int64_t guide_width() const { return mlp_w2.dim(1); }
  std::int64_t parameter_count() const;

  ParamSet<float> to_params(const std::string& prefix = "jbu.") const;
  static JbuParams from_params(const ParamSet<float>& params, int radius, const std::string& prefix = "jbu.");
};

/// exp(-|(p, q) - centre|^2 / (2 tau^2)) over a (2r+1) x (2r+1) window, unnormalised.
Tensor spatial_kernel(int radius, float tau_spatial);

/// Softmax over window rows of <centre, row> / tau^2. window: n x g.
Tensor range_kernel(const Tensor& window, std::span<const float> centre, float tau_range);

// -- fused kernel ----------------------------------------------------------

template <typename T>
struct JbuForwardResult {
  BasicTensor<T> out;      // H x W x C
  BasicTensor<T> weights;  // H x W x K when requested, else empty
};

/// up: H x W x C values already on the output grid; guide: H x W x G
/// projected guidance. Parallel over output rows.
template <typename T>
JbuForwardResult<T> jbu_forward(const BasicTensor<T>& up, const BasicTensor<T>& guide, T tau_spatial, T tau_range,
                                int radius, bool keep_weights);

template <typename T>
struct JbuBackwardResult {
  BasicTensor<T> d_up;
  BasicTensor<T> d_guide;
  double d_log_tau_spatial = 0.0;
  double d_log_tau_range = 0.0;
};

/// Adjoint of jbu_forward. Scatter terms are evaluated as gathers over the
/// clamped windows so every output has a fixed summation order.
template <typename T>
JbuBackwardResult<T> jbu_backward(const BasicTensor<T>& up, const BasicTensor<T>& guide,
                                  const BasicTensor<T>& weights, const BasicTensor<T>& grad_out, T tau_spatial,
                                  T tau_range, int radius);

// -- differentiable graph form -------------------------------------------

template <typename T>
struct JbuVars {
  Var<T> w1, b1, w2, b2, log_tau_spatial, log_tau_range;
  int radius = 5;

  static JbuVars from(const VarMap<T>& vars, int radius, const std::string& prefix = "jbu.");
};

/// Per-pixel guidance MLP: H x W x 3 -> H x W x g (GELU between layers).
template <typename T>
Var<T> guidance_features(const Var<T>& guidance, const JbuVars<T>& p);

template <typename T>
Var<T> jbu_combine(const Var<T>& up, const Var<T>& guide, const Var<T>& log_tau_spatial,
                   const Var<T>& log_tau_range, int radius);

/// One 2x stage: lr (h x w x c) with guidance (2h x 2w x 3) -> 2h x 2w x c.
template <typename T>
Var<T> jbu_apply(const Var<T>& lr, const Var<T>& guidance, const JbuVars<T>& p);

/// Inference form of jbu_apply.
FeatureMap jbu_apply(const FeatureMap& lr, const Tensor& guidance, const JbuParams& p);

namespace reference {

/// Serial per-pixel evaluation of one JBU stage straight from the kernel
/// definitions (explicit k_spatial, k_range softmax, joint renormalisation).
FeatureMap jbu_apply(const FeatureMap& lr, const Tensor& guidance, const JbuParams& p);

}  // namespace reference

}  // namespace ovseg
