#pragma once

#include <functional>
#include <string>

#include "ovseg/numeric/autodiff.hpp"

namespace ovseg {

template <typename T>
using LossBuilder = std::function<Var<T>(Graph<T>&, const VarMap<T>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares backward() against central differences for every entry of every
/// parameter. Error per entry is |analytic - numeric| / (|analytic| + 1e-8).
/// The builder is re-run on a fresh graph for each perturbation.
template <typename T>
GradCheckReport finite_difference_check(const LossBuilder<T>& build, const ParamSet<T>& params, double step);

}  // namespace ovseg
