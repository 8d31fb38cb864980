#pragma once

// OpenMP-parallel forward kernels and their adjoints. Every kernel computes
// each output element with a fixed reduction order, so results are
// bit-identical for any thread count. Layouts: matrices are rows x cols,
// spatial maps are H x W x C.

#include <cstdint>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg::kernels {

enum class PadMode { kReplicate, kReflect, kZero };

/// Maps a possibly out-of-range index onto [0, n) under `mode`; -1 means a
/// zero-padded position.
std::int64_t pad_index(std::int64_t i, std::int64_t n, PadMode mode) noexcept;

// -- matrix products -------------------------------------------------------
template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a (m x k) times b^T where b is (n x k).
template <typename T> BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// a^T times b where a is (k x m) and b is (k x n).
template <typename T> BasicTensor<T> matmul_at(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// x (m x k) * w (k x n) + bias (n). An empty bias is skipped.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias);

// -- elementwise -----------------------------------------------------------
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> scale(const BasicTensor<T>& a, T s);
/// Adds a length-n vector to every row of the trailing axis.
template <typename T> BasicTensor<T> add_row(const BasicTensor<T>& x, const BasicTensor<T>& row);
template <typename T> BasicTensor<T> tanh(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> relu(const BasicTensor<T>& x);
/// Exact (erf) GELU.
template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T> T gelu_grad(T x) noexcept;

// -- normalisation -------------------------------------------------------------
/// Softmax along the last axis with max subtraction.
template <typename T> BasicTensor<T> softmax_rows(const BasicTensor<T>& x);

template <typename T>
struct LayerNormResult {
  BasicTensor<T> out;
  BasicTensor<T> normalized;  // before affine
  std::vector<T> rstd;        // per row
};
/// Layer normalisation over the last axis; empty gamma/beta mean identity affine.
template <typename T>
LayerNormResult<T> layer_norm_rows(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                   const BasicTensor<T>& beta, T eps = T(1e-5));

// -- spatial ---------------------------------------------------------------
template <typename T>
BasicTensor<T> pad2d(const BasicTensor<T>& x, int top, int bottom, int left, int right, PadMode mode);
template <typename T>
BasicTensor<T> pad2d_adjoint(const BasicTensor<T>& grad_padded, const Shape& input_shape, int top, int left,
                             PadMode mode);

/// Patches for a kh x kw convolution over an already padded map:
/// rows = output pixels, cols = (ky, kx, cin).
template <typename T>
BasicTensor<T> im2col(const BasicTensor<T>& padded, int kh, int kw, int stride);
template <typename T>
BasicTensor<T> col2im(const BasicTensor<T>& cols, const Shape& padded_shape, int kh, int kw, int stride);

/// 2-D convolution, weight (kh, kw, cin, cout), `pad` pixels of `mode` padding per side.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias, int stride,
                      int pad, PadMode mode = PadMode::kReplicate);

/// Bilinear resize with half-pixel centres and edge clamping.
template <typename T> BasicTensor<T> resize_bilinear(const BasicTensor<T>& x, std::int64_t oh, std::int64_t ow);
template <typename T>
BasicTensor<T> resize_bilinear_adjoint(const BasicTensor<T>& grad_out, const Shape& input_shape);

/// For each pixel, the (2r+1)^2 neighbours (row-major over the window) under
/// `mode` padding: H x W x K x C.
template <typename T>
BasicTensor<T> extract_windows(const BasicTensor<T>& x, int radius, PadMode mode = PadMode::kReplicate);
template <typename T>
BasicTensor<T> extract_windows_adjoint(const BasicTensor<T>& grad, const Shape& input_shape, int radius,
                                       PadMode mode = PadMode::kReplicate);

/// Per-channel strided convolution with one shared s x s kernel and
/// replicate padding `pad` on each side.
template <typename T>
BasicTensor<T> blur_downsample(const BasicTensor<T>& x, const BasicTensor<T>& kernel, int stride, int pad);

// -- reductions ------------------------------------------------------------
/// Mean squared error accumulated in double.
template <typename T> double mse(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> double sum(const BasicTensor<T>& a);

}  // namespace ovseg::kernels
