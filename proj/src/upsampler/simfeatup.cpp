#include "ovseg/upsampler/simfeatup.hpp"

#include <cmath>

#include "ovseg/numeric/ad_ops.hpp"
#include "ovseg/numeric/kernels.hpp"
#include "ovseg/numeric/rng.hpp"

namespace ovseg {
namespace {

const Tensor& param(const ParamSet<float>& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw DataError("missing parameter '" + name + "'");
  return it->second;
}

}  // namespace

CrnParams CrnParams::init(std::uint64_t seed, int channels, int hidden) {
  if (channels <= 0 || hidden <= 0) throw ArgumentError("CrnParams::init: channels and hidden must be positive");
  SplitMix64 rng(seed);
  const double b1 = 1.0 / std::sqrt(9.0 * channels), b2 = 1.0 / std::sqrt(9.0 * hidden);
  CrnParams p;
  p.w1 = uniform_tensor({3, 3, channels, hidden}, rng, -b1, b1);
  p.b1 = Tensor({hidden});
  p.w2 = uniform_tensor({3, 3, hidden, 3}, rng, -b2, b2);
  p.b2 = Tensor({3});
  return p;
}

ParamSet<float> CrnParams::to_params(const std::string& prefix) const {
  return {{prefix + "w1", w1}, {prefix + "b1", b1}, {prefix + "w2", w2}, {prefix + "b2", b2}};
}

CrnParams CrnParams::from_params(const ParamSet<float>& params, const std::string& prefix) {
  CrnParams p{param(params, prefix + "w1"), param(params, prefix + "b1"), param(params, prefix + "w2"),
              param(params, prefix + "b2")};
  if (p.w1.rank() != 4 || p.w2.rank() != 4 || p.w1.dim(3) != p.w2.dim(2) || p.w2.dim(3) != 3 ||
      p.b1.size() != static_cast<std::size_t>(p.w1.dim(3)) || p.b2.size() != 3) {
    throw DataError("CRN parameters have inconsistent shapes");
  }
  return p;
}

DownsamplerParams DownsamplerParams::init(int factor, int size) {
  upsample_stages(factor);
  if (size == 0) size = factor;
  if (size < factor || (size - factor) % 2 != 0)
    throw ArgumentError("downsampler size must be >= factor with an even difference");
  return DownsamplerParams{Tensor({size, size}), factor};
}

Tensor DownsamplerParams::kernel() const {
  return kernels::softmax_rows(logits.reshaped({1, size() * size()})).reshaped({size(), size()});
}

ParamSet<float> DownsamplerParams::to_params(const std::string& prefix) const { return {{prefix + "logits", logits}}; }

DownsamplerParams DownsamplerParams::from_params(const ParamSet<float>& params, int factor,
                                                 const std::string& prefix) {
  DownsamplerParams p{param(params, prefix + "logits"), factor};
  if (p.logits.rank() != 2 || p.logits.dim(0) != p.logits.dim(1) || p.size() < factor ||
      (p.size() - factor) % 2 != 0) {
    throw DataError("downsampler logits have an invalid shape " + shape_string(p.logits.shape()));
  }
  return p;
}

SimFeatUpParams SimFeatUpParams::init(std::uint64_t seed, int channels, int factor, int guide_width, int radius,
                                      int crn_hidden) {
  return SimFeatUpParams{JbuParams::init(derive_seed(seed, 11), guide_width, radius),
                         CrnParams::init(derive_seed(seed, 12), channels, crn_hidden),
                         DownsamplerParams::init(factor), factor};
}

ParamSet<float> SimFeatUpParams::to_params() const {
  auto all = jbu.to_params();
  all.merge(crn.to_params());
  all.merge(down.to_params());
  return all;
}

void SimFeatUpParams::assign(const ParamSet<float>& params) {
  jbu = JbuParams::from_params(params, jbu.radius);
  crn = CrnParams::from_params(params);
  down = DownsamplerParams::from_params(params, factor);
}

int upsample_stages(int factor) {
  if (factor < 1 || (factor & (factor - 1)) != 0)
    throw ArgumentError("upsample factor must be a power of 2, got " + std::to_string(factor));
  int n = 0;
  while ((1 << n) < factor) ++n;
  return n;
}

std::int64_t jbu_stack_parameter_count(const JbuParams& p, int factor) {
  return upsample_stages(factor) * p.parameter_count();
}

template <typename T>
CrnVars<T> CrnVars<T>::from(const VarMap<T>& vars, const std::string& prefix) {
  return CrnVars<T>{lookup(vars, prefix + "w1"), lookup(vars, prefix + "b1"), lookup(vars, prefix + "w2"),
                    lookup(vars, prefix + "b2")};
}

template <typename T>
Var<T> simfeatup_upsample(const Var<T>& lr, const Var<T>& image, const JbuVars<T>& p, int factor) {
  const int stages = upsample_stages(factor);
  const auto& lv = lr.value();
  const auto& iv = image.value();
  require_rank(lv, 3, "simfeatup_upsample");
  require_rank(iv, 3, "simfeatup_upsample");
  if (iv.dim(0) != lv.dim(0) * factor || iv.dim(1) != lv.dim(1) * factor || iv.dim(2) != 3) {
    throw ShapeError("simfeatup_upsample: image " + shape_string(iv.shape()) + " is not " + std::to_string(factor) +
                     "x the grid " + shape_string(lv.shape()));
  }
  Var<T> x = lr;
  for (int s = 1; s <= stages; ++s) {
    const std::int64_t h = lv.dim(0) << s, w = lv.dim(1) << s;
    const Var<T> guide = s == stages ? image : ad::resize_bilinear(image, h, w);
    x = jbu_apply(x, guide, p);
  }
  return x;
}

template <typename T>
Var<T> crn_reconstruct(const Var<T>& hr, const CrnVars<T>& p) {
  const auto& hv = hr.value();
  require_rank(hv, 3, "crn_reconstruct");
  if (hv.dim(2) != p.w1.value().dim(2)) {
    throw ShapeError("crn_reconstruct: feature width " + std::to_string(hv.dim(2)) + " does not match CRN input " +
                     std::to_string(p.w1.value().dim(2)));
  }
  auto hidden = ad::gelu(ad::conv2d(hr, p.w1, p.b1, 1, 1, kernels::PadMode::kReplicate));
  return ad::tanh(ad::conv2d(hidden, p.w2, p.b2, 1, 1, kernels::PadMode::kReplicate));
}

template <typename T>
Var<T> downsample(const Var<T>& hr, const Var<T>& logits, int factor) {
  upsample_stages(factor);
  const auto& hv = hr.value();
  require_rank(hv, 3, "downsample");
  if (hv.dim(0) % factor != 0 || hv.dim(1) % factor != 0) {
    throw ShapeError("downsample: " + shape_string(hv.shape()) + " is not divisible by factor " +
                     std::to_string(factor));
  }
  const auto s = logits.value().dim(0);
  auto kernel = ad::reshape(ad::softmax_rows(ad::reshape(logits, {1, s * s})), {s, s});
  return ad::blur_downsample(hr, kernel, factor, static_cast<int>((s - factor) / 2));
}

FeatureMap simfeatup_upsample(const FeatureMap& lr, const Tensor& image, const JbuParams& p, int factor) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, p.to_params(), false);
  return simfeatup_upsample(g.constant(lr), g.constant(image), JbuVars<float>::from(vars, p.radius), factor).value();
}

Tensor crn_reconstruct(const FeatureMap& hr, const CrnParams& p) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, p.to_params(), false);
  return crn_reconstruct(g.constant(hr), CrnVars<float>::from(vars)).value();
}

FeatureMap downsample(const FeatureMap& hr, const DownsamplerParams& p) {
  Graph<float> g;
  g.set_grad_enabled(false);
  return downsample(g.constant(hr), g.constant(p.logits), p.factor).value();
}

#define OVSEG_INSTANTIATE_SIMFEATUP(T)                                                   \
  template struct CrnVars<T>;                                                            \
  template Var<T> simfeatup_upsample(const Var<T>&, const Var<T>&, const JbuVars<T>&, int); \
  template Var<T> crn_reconstruct(const Var<T>&, const CrnVars<T>&);                     \
  template Var<T> downsample(const Var<T>&, const Var<T>&, int);

OVSEG_INSTANTIATE_SIMFEATUP(float)
OVSEG_INSTANTIATE_SIMFEATUP(double)

#undef OVSEG_INSTANTIATE_SIMFEATUP

}  // namespace ovseg
