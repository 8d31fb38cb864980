#pragma once

// Straight-line serial versions of the hot kernels. They share no code with
// the parallel kernels and exist for parity tests and the benchmark.

#include "ovseg/numeric/kernels.hpp"

namespace ovseg::reference {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad,
              kernels::PadMode mode = kernels::PadMode::kReplicate);
Tensor softmax_rows(const Tensor& x);

}  // namespace ovseg::reference
