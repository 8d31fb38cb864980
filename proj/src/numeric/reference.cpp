#include "ovseg/numeric/reference.hpp"

#include <algorithm>
#include <cmath>

namespace ovseg::reference {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("reference::matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p)
      for (std::int64_t j = 0; j < n; ++j) c.at(i, j) += a.at(i, p) * b.at(p, j);
  return c;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad, kernels::PadMode mode) {
  if (x.rank() != 3 || w.rank() != 4 || w.dim(2) != x.dim(2))
    throw ShapeError("reference::conv2d: incompatible shapes " + shape_string(x.shape()) + " and " +
                     shape_string(w.shape()));
  const auto h = x.dim(0), wd = x.dim(1), cin = x.dim(2);
  const auto kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
  Tensor y({oh, ow, cout});
  for (std::int64_t oy = 0; oy < oh; ++oy)
    for (std::int64_t ox = 0; ox < ow; ++ox)
      for (std::int64_t co = 0; co < cout; ++co) {
        float acc = bias.empty() ? 0.0f : bias[co];
        for (std::int64_t ky = 0; ky < kh; ++ky)
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const auto sy = kernels::pad_index(oy * stride + ky - pad, h, mode);
            const auto sx = kernels::pad_index(ox * stride + kx - pad, wd, mode);
            if (sy < 0 || sx < 0) continue;
            for (std::int64_t ci = 0; ci < cin; ++ci)
              acc += x.at(sy, sx, ci) * w[((ky * kw + kx) * cin + ci) * cout + co];
          }
        y.at(oy, ox, co) = acc;
      }
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  const auto n = x.shape().back();
  const auto rows = static_cast<std::int64_t>(x.size()) / n;
  Tensor y(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    float mx = x[r * n];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[r * n + j]);
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) total += std::exp(static_cast<double>(x[r * n + j] - mx));
    for (std::int64_t j = 0; j < n; ++j)
      y[r * n + j] = static_cast<float>(std::exp(static_cast<double>(x[r * n + j] - mx)) / total);
  }
  return y;
}

}  // namespace ovseg::reference
