#pragma once

#include <map>
#include <string>
#include <vector>

#include "ovseg/numeric/autodiff.hpp"

namespace ovseg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept in double per parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {});

  /// Updates every parameter that has a gradient entry; others are untouched.
  void step(ParamSet<float>& params, const std::map<std::string, Tensor>& grads);

  long steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace ovseg
