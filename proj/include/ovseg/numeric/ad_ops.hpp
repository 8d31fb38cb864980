#pragma once

// Differentiable wrappers over ovseg::kernels. Each op evaluates its forward
// kernel immediately and, when gradients are enabled, records the adjoint.

#include "ovseg/numeric/autodiff.hpp"
#include "ovseg/numeric/kernels.hpp"

namespace ovseg::ad {

using kernels::PadMode;

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
/// Adds a vector along the trailing axis of x.
template <typename T> Var<T> add_row(const Var<T>& x, const Var<T>& row);

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// x * w (+ bias when `bias` is valid).
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> gelu(const Var<T>& x);
template <typename T> Var<T> exp(const Var<T>& x);

template <typename T> Var<T> softmax_rows(const Var<T>& x);
template <typename T> Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);

template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
/// Rows [begin, end) of a matrix.
template <typename T> Var<T> slice_rows(const Var<T>& x, std::int64_t begin, std::int64_t end);

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad,
              PadMode mode = PadMode::kReplicate);
template <typename T> Var<T> resize_bilinear(const Var<T>& x, std::int64_t oh, std::int64_t ow);
template <typename T> Var<T> pad2d(const Var<T>& x, int top, int bottom, int left, int right, PadMode mode);
template <typename T> Var<T> extract_windows(const Var<T>& x, int radius, PadMode mode = PadMode::kReplicate);
template <typename T> Var<T> blur_downsample(const Var<T>& x, const Var<T>& kernel, int stride, int pad);

/// Scalar mean squared error, shape {1}.
template <typename T> Var<T> mse(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);

}  // namespace ovseg::ad
