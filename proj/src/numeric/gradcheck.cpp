#include "ovseg/numeric/gradcheck.hpp"

#include <cmath>

namespace ovseg {
namespace {

template <typename T>
double evaluate(const LossBuilder<T>& build, const ParamSet<T>& params) {
  Graph<T> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, params, false);
  return static_cast<double>(build(g, vars).value()[0]);
}

}  // namespace

template <typename T>
GradCheckReport finite_difference_check(const LossBuilder<T>& build, const ParamSet<T>& params, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite_difference_check: step must be positive");
  Graph<T> g;
  auto vars = bind_params(g, params, true);
  auto loss = build(g, vars);
  const auto analytic = backward(g, loss);

  GradCheckReport report;
  ParamSet<T> probe = params;
  for (auto& [name, tensor] : probe) {
    const auto& grad = analytic.grads.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const T orig = tensor[i];
      tensor[i] = static_cast<T>(orig + step);
      const double up = evaluate(build, probe);
      tensor[i] = static_cast<T>(orig - step);
      const double down = evaluate(build, probe);
      tensor[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = static_cast<double>(grad[i]);
      const double err = std::abs(a - numeric) / (std::abs(a) + 1e-8);
      ++report.entries_checked;
      if (report.worst_param.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

template GradCheckReport finite_difference_check(const LossBuilder<float>&, const ParamSet<float>&, double);
template GradCheckReport finite_difference_check(const LossBuilder<double>&, const ParamSet<double>&, double);

}  // namespace ovseg
