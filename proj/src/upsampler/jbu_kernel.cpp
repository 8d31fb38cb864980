#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ovseg/numeric/ad_ops.hpp"
#include "ovseg/numeric/kernels.hpp"
#include "ovseg/numeric/rng.hpp"
#include "ovseg/upsampler/jbu.hpp"

namespace ovseg {
namespace {

constexpr std::int64_t kParallelWork = 1 << 14;

// Clamped source index for each window offset, per axis.
std::vector<std::int64_t> clamp_table(std::int64_t n, int radius) {
  const std::int64_t edge = 2 * radius + 1;
  std::vector<std::int64_t> t(static_cast<std::size_t>(n * edge));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t d = -radius; d <= radius; ++d) t[i * edge + d + radius] = std::clamp<std::int64_t>(i + d, 0, n - 1);
  return t;
}

// Centres c with clamp(c + d, 0, n-1) == p, as an inclusive range.
std::pair<std::int64_t, std::int64_t> centres_hitting(std::int64_t p, std::int64_t d, std::int64_t n) {
  std::int64_t lo = p == 0 ? 0 : p - d;
  std::int64_t hi = p == n - 1 ? n - 1 : p - d;
  return {std::max<std::int64_t>(lo, 0), std::min<std::int64_t>(hi, n - 1)};
}

template <typename T>
void check_jbu_operands(const BasicTensor<T>& up, const BasicTensor<T>& guide, int radius) {
  require_rank(up, 3, "jbu");
  require_rank(guide, 3, "jbu");
  if (up.dim(0) != guide.dim(0) || up.dim(1) != guide.dim(1)) {
    throw ShapeError("jbu: value grid " + shape_string(up.shape()) + " and guidance " + shape_string(guide.shape()) +
                     " differ spatially");
  }
  if (radius < 1) throw ArgumentError("jbu: radius must be at least 1");
}

}  // namespace

JbuParams JbuParams::init(std::uint64_t seed, int guide_width, int radius) {
  if (guide_width <= 0 || radius < 1) throw ArgumentError("JbuParams::init: invalid guide width or radius");
  SplitMix64 rng(seed);
  const std::int64_t g = guide_width;
  JbuParams p;
  const double b1 = 1.0 / std::sqrt(3.0), b2 = 1.0 / std::sqrt(static_cast<double>(g));
  p.mlp_w1 = uniform_tensor({3, g}, rng, -b1, b1);
  p.mlp_b1 = Tensor({g}, 0.0f);
  p.mlp_w2 = uniform_tensor({g, g}, rng, -b2, b2);
  p.mlp_b2 = Tensor({g}, 0.0f);
  p.log_tau_spatial = Tensor::scalar(std::log(2.0f));
  p.log_tau_range = Tensor::scalar(0.0f);
  p.radius = radius;
  return p;
}

float JbuParams::tau_spatial() const { return std::exp(log_tau_spatial[0]); }
float JbuParams::tau_range() const { return std::exp(log_tau_range[0]); }

std::int64_t JbuParams::parameter_count() const {
  return static_cast<std::int64_t>(mlp_w1.size() + mlp_b1.size() + mlp_w2.size() + mlp_b2.size() +
                                   log_tau_spatial.size() + log_tau_range.size());
}

ParamSet<float> JbuParams::to_params(const std::string& prefix) const {
  return {{prefix + "mlp.w1", mlp_w1},
          {prefix + "mlp.b1", mlp_b1},
          {prefix + "mlp.w2", mlp_w2},
          {prefix + "mlp.b2", mlp_b2},
          {prefix + "log_tau_spatial", log_tau_spatial},
          {prefix + "log_tau_range", log_tau_range}};
}

JbuParams JbuParams::from_params(const ParamSet<float>& params, int radius, const std::string& prefix) {
  auto get = [&](const std::string& n) {
    auto it = params.find(prefix + n);
    if (it == params.end()) throw DataError("missing parameter '" + prefix + n + "'");
    return it->second;
  };
  JbuParams p{get("mlp.w1"), get("mlp.b1"), get("mlp.w2"), get("mlp.b2"), get("log_tau_spatial"),
              get("log_tau_range"), radius};
  if (p.mlp_w1.rank() != 2 || p.mlp_w1.dim(0) != 3 || p.mlp_w2.rank() != 2 || p.mlp_w2.dim(0) != p.mlp_w1.dim(1) ||
      p.mlp_b1.size() != static_cast<std::size_t>(p.mlp_w1.dim(1)) ||
      p.mlp_b2.size() != static_cast<std::size_t>(p.mlp_w2.dim(1)) || p.log_tau_spatial.size() != 1 ||
      p.log_tau_range.size() != 1) {
    throw DataError("JBU parameters have inconsistent shapes");
  }
  return p;
}

Tensor spatial_kernel(int radius, float tau_spatial) {
  if (radius < 1) throw ArgumentError("spatial_kernel: radius must be at least 1");
  if (!(tau_spatial > 0.0f)) throw ArgumentError("spatial_kernel: tau must be positive");
  const std::int64_t edge = 2 * radius + 1;
  Tensor k({edge, edge});
  const double denom = 2.0 * static_cast<double>(tau_spatial) * tau_spatial;
  for (int p = -radius; p <= radius; ++p)
    for (int q = -radius; q <= radius; ++q)
      k.at(p + radius, q + radius) = static_cast<float>(std::exp(-static_cast<double>(p * p + q * q) / denom));
  return k;
}

Tensor range_kernel(const Tensor& window, std::span<const float> centre, float tau_range) {
  require_rank(window, 2, "range_kernel");
  if (window.dim(1) != static_cast<std::int64_t>(centre.size()))
    throw ShapeError("range_kernel: centre width differs from window width");
  if (!(tau_range > 0.0f)) throw ArgumentError("range_kernel: tau must be positive");
  const double inv = 1.0 / (static_cast<double>(tau_range) * tau_range);
  const auto n = window.dim(0), g = window.dim(1);
  std::vector<double> logits(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::int64_t j = 0; j < g; ++j) dot += static_cast<double>(centre[j]) * window.at(i, j);
    logits[i] = dot * inv;
    mx = std::max(mx, logits[i]);
  }
  double total = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - mx);
    total += l;
  }
  Tensor w({n});
  for (std::int64_t i = 0; i < n; ++i) w[i] = static_cast<float>(logits[i] / total);
  return w;
}

template <typename T>
JbuForwardResult<T> jbu_forward(const BasicTensor<T>& up, const BasicTensor<T>& guide, T tau_spatial, T tau_range,
                                int radius, bool keep_weights) {
  check_jbu_operands(up, guide, radius);
  const std::int64_t h = up.dim(0), w = up.dim(1), c = up.dim(2), g = guide.dim(2);
  const std::int64_t edge = 2 * radius + 1, kk = edge * edge;
  const T range_coef = T(1) / (tau_range * tau_range);
  const T spatial_coef = T(0.5) / (tau_spatial * tau_spatial);
  const auto rows = clamp_table(h, radius);
  const auto cols = clamp_table(w, radius);
  std::vector<T> dist(kk);
  for (std::int64_t s = 0; s < kk; ++s) {
    const std::int64_t dy = s / edge - radius, dx = s % edge - radius;
    dist[s] = static_cast<T>(dy * dy + dx * dx);
  }

  JbuForwardResult<T> r{BasicTensor<T>({h, w, c}), {}};
  if (keep_weights) r.weights = BasicTensor<T>({h, w, kk});
  const T* pu = up.ptr();
  const T* pg = guide.ptr();
  T* po = r.out.ptr();
  T* pw = keep_weights ? r.weights.ptr() : nullptr;

#pragma omp parallel if (h * w * kk * (c + g) > kParallelWork)
  {
    std::vector<T> logit(kk);
    std::vector<std::int64_t> src(kk);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < h; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        const std::int64_t centre = i * w + j;
        const T* gc = pg + centre * g;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::int64_t s = 0; s < kk; ++s) {
          const std::int64_t n = rows[i * edge + s / edge] * w + cols[j * edge + s % edge];
          src[s] = n;
          const T* gn = pg + n * g;
          T dot = 0;
          for (std::int64_t t = 0; t < g; ++t) dot += gc[t] * gn[t];
          logit[s] = range_coef * dot - spatial_coef * dist[s];
          mx = std::max(mx, logit[s]);
        }
        T total = 0;
        for (std::int64_t s = 0; s < kk; ++s) {
          logit[s] = std::exp(logit[s] - mx);
          total += logit[s];
        }
        const T inv = T(1) / total;
        T* out = po + centre * c;
        for (std::int64_t s = 0; s < kk; ++s) {
          const T wk = logit[s] * inv;
          if (pw) pw[centre * kk + s] = wk;
          const T* un = pu + src[s] * c;
          for (std::int64_t t = 0; t < c; ++t) out[t] += wk * un[t];
        }
      }
    }
  }
  return r;
}

template <typename T>
JbuBackwardResult<T> jbu_backward(const BasicTensor<T>& up, const BasicTensor<T>& guide,
                                  const BasicTensor<T>& weights, const BasicTensor<T>& grad_out, T tau_spatial,
                                  T tau_range, int radius) {
  check_jbu_operands(up, guide, radius);
  const std::int64_t h = up.dim(0), w = up.dim(1), c = up.dim(2), g = guide.dim(2);
  const std::int64_t edge = 2 * radius + 1, kk = edge * edge;
  if (weights.shape() != Shape{h, w, kk}) throw ShapeError("jbu_backward: weights do not match the window layout");
  require_same_shape(grad_out, up, "jbu_backward");
  const T range_coef = T(1) / (tau_range * tau_range);
  const T spatial_coef = T(0.5) / (tau_spatial * tau_spatial);
  const auto rows = clamp_table(h, radius);
  const auto cols = clamp_table(w, radius);

  const T* pu = up.ptr();
  const T* pg = guide.ptr();
  const T* pw = weights.ptr();
  const T* pd = grad_out.ptr();

  JbuBackwardResult<T> r{BasicTensor<T>(up.shape()), BasicTensor<T>(guide.shape()), 0.0, 0.0};
  BasicTensor<T> dlogit({h, w, kk});
  std::vector<double> row_range(h, 0.0), row_spatial(h, 0.0);

  // Pass 1, per centre: logit gradients, the centre's own guidance gradient
  // and per-row partial sums for the temperature gradients.
#pragma omp parallel if (h * w * kk * (c + 2 * g) > kParallelWork)
  {
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < h; ++i) {
      double acc_range = 0.0, acc_spatial = 0.0;
      for (std::int64_t j = 0; j < w; ++j) {
        const std::int64_t centre = i * w + j;
        const T* gc = pg + centre * g;
        const T* dout = pd + centre * c;
        const T* wc = pw + centre * kk;
        T* dl = dlogit.ptr() + centre * kk;
        T weighted = 0;
        for (std::int64_t s = 0; s < kk; ++s) {
          const T* un = pu + (rows[i * edge + s / edge] * w + cols[j * edge + s % edge]) * c;
          T dw = 0;
          for (std::int64_t t = 0; t < c; ++t) dw += dout[t] * un[t];
          dl[s] = dw;
          weighted += wc[s] * dw;
        }
        T* dgc = r.d_guide.ptr() + centre * g;
        for (std::int64_t s = 0; s < kk; ++s) {
          dl[s] = wc[s] * (dl[s] - weighted);
          const std::int64_t dy = s / edge - radius, dx = s % edge - radius;
          const T* gn = pg + (rows[i * edge + s / edge] * w + cols[j * edge + s % edge]) * g;
          T dot = 0;
          for (std::int64_t t = 0; t < g; ++t) {
            dot += gc[t] * gn[t];
            dgc[t] += range_coef * dl[s] * gn[t];
          }
          acc_range += static_cast<double>(dl[s]) * dot;
          acc_spatial -= static_cast<double>(dl[s]) * static_cast<double>(dy * dy + dx * dx);
        }
      }
      row_range[i] = acc_range;
      row_spatial[i] = acc_spatial;
    }
  }

  // Pass 2, per source pixel: gather every (centre, slot) pair that reads it.
#pragma omp parallel for schedule(static) if (h * w * kk * (c + g) > kParallelWork)
  for (std::int64_t py = 0; py < h; ++py) {
    for (std::int64_t px = 0; px < w; ++px) {
      const std::int64_t target = py * w + px;
      T* du = r.d_up.ptr() + target * c;
      T* dg = r.d_guide.ptr() + target * g;
      for (std::int64_t dy = -radius; dy <= radius; ++dy) {
        const auto [ylo, yhi] = centres_hitting(py, dy, h);
        for (std::int64_t dx = -radius; dx <= radius; ++dx) {
          const auto [xlo, xhi] = centres_hitting(px, dx, w);
          const std::int64_t s = (dy + radius) * edge + (dx + radius);
          for (std::int64_t cy = ylo; cy <= yhi; ++cy)
            for (std::int64_t cx = xlo; cx <= xhi; ++cx) {
              const std::int64_t centre = cy * w + cx;
              const T wk = pw[centre * kk + s];
              const T dl = dlogit[centre * kk + s] * range_coef;
              const T* dout = pd + centre * c;
              const T* gc = pg + centre * g;
              for (std::int64_t t = 0; t < c; ++t) du[t] += wk * dout[t];
              for (std::int64_t t = 0; t < g; ++t) dg[t] += dl * gc[t];
            }
        }
      }
    }
  }

  double d_range_coef = 0.0, d_spatial_coef = 0.0;
  for (std::int64_t i = 0; i < h; ++i) {
    d_range_coef += row_range[i];
    d_spatial_coef += row_spatial[i];
  }
  // range_coef = exp(-2 log tau_r), spatial_coef = exp(-2 log tau_s) / 2.
  r.d_log_tau_range = d_range_coef * -2.0 * static_cast<double>(range_coef);
  r.d_log_tau_spatial = d_spatial_coef * -2.0 * static_cast<double>(spatial_coef);
  return r;
}

template <typename T>
JbuVars<T> JbuVars<T>::from(const VarMap<T>& vars, int radius, const std::string& prefix) {
  return JbuVars<T>{lookup(vars, prefix + "mlp.w1"),          lookup(vars, prefix + "mlp.b1"),
                    lookup(vars, prefix + "mlp.w2"),          lookup(vars, prefix + "mlp.b2"),
                    lookup(vars, prefix + "log_tau_spatial"), lookup(vars, prefix + "log_tau_range"),
                    radius};
}

template <typename T>
Var<T> guidance_features(const Var<T>& guidance, const JbuVars<T>& p) {
  const auto& gv = guidance.value();
  require_rank(gv, 3, "guidance_features");
  if (gv.dim(2) != 3) throw ShapeError("guidance_features: expected RGB guidance, got " + shape_string(gv.shape()));
  const auto h = gv.dim(0), w = gv.dim(1);
  auto pixels = ad::reshape(guidance, {h * w, 3});
  auto hidden = ad::gelu(ad::linear(pixels, p.w1, p.b1));
  auto out = ad::linear(hidden, p.w2, p.b2);
  return ad::reshape(out, {h, w, out.value().dim(1)});
}

template <typename T>
Var<T> jbu_combine(const Var<T>& up, const Var<T>& guide, const Var<T>& log_tau_spatial, const Var<T>& log_tau_range,
                   int radius) {
  const T tau_s = std::exp(log_tau_spatial.value()[0]);
  const T tau_r = std::exp(log_tau_range.value()[0]);
  auto& graph = up.graph();
  const bool need_grad = graph.grad_enabled() &&
                         (graph.requires_grad(up) || graph.requires_grad(guide) ||
                          graph.requires_grad(log_tau_spatial) || graph.requires_grad(log_tau_range));
  auto fwd = jbu_forward(up.value(), guide.value(), tau_s, tau_r, radius, need_grad);
  return graph.record(std::move(fwd.out), {up, guide, log_tau_spatial, log_tau_range},
                      [=, weights = std::move(fwd.weights)](Graph<T>& gr, const BasicTensor<T>& go) {
                        auto b = jbu_backward(up.value(), guide.value(), weights, go, tau_s, tau_r, radius);
                        gr.accumulate_grad(up, b.d_up);
                        gr.accumulate_grad(guide, b.d_guide);
                        gr.accumulate_grad(log_tau_spatial, BasicTensor<T>::scalar(static_cast<T>(b.d_log_tau_spatial)));
                        gr.accumulate_grad(log_tau_range, BasicTensor<T>::scalar(static_cast<T>(b.d_log_tau_range)));
                      });
}

template <typename T>
Var<T> jbu_apply(const Var<T>& lr, const Var<T>& guidance, const JbuVars<T>& p) {
  const auto& lv = lr.value();
  const auto& gv = guidance.value();
  require_rank(lv, 3, "jbu_apply");
  require_rank(gv, 3, "jbu_apply");
  if (gv.dim(0) != 2 * lv.dim(0) || gv.dim(1) != 2 * lv.dim(1)) {
    throw ShapeError("jbu_apply: guidance " + shape_string(gv.shape()) + " must be exactly twice the spatial size of " +
                     shape_string(lv.shape()));
  }
  auto up = ad::resize_bilinear(lr, gv.dim(0), gv.dim(1));
  auto guide = guidance_features(guidance, p);
  return jbu_combine(up, guide, p.log_tau_spatial, p.log_tau_range, p.radius);
}

FeatureMap jbu_apply(const FeatureMap& lr, const Tensor& guidance, const JbuParams& p) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, p.to_params(), false);
  auto out = jbu_apply(g.constant(lr), g.constant(guidance), JbuVars<float>::from(vars, p.radius));
  return out.value();
}

#define OVSEG_INSTANTIATE_JBU(T)                                                                               \
  template JbuForwardResult<T> jbu_forward(const BasicTensor<T>&, const BasicTensor<T>&, T, T, int, bool);     \
  template JbuBackwardResult<T> jbu_backward(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                             const BasicTensor<T>&, const BasicTensor<T>&, T, T, int);         \
  template struct JbuVars<T>;                                                                                  \
  template Var<T> guidance_features(const Var<T>&, const JbuVars<T>&);                                         \
  template Var<T> jbu_combine(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&, int);                \
  template Var<T> jbu_apply(const Var<T>&, const Var<T>&, const JbuVars<T>&);

OVSEG_INSTANTIATE_JBU(float)
OVSEG_INSTANTIATE_JBU(double)

#undef OVSEG_INSTANTIATE_JBU

}  // namespace ovseg
