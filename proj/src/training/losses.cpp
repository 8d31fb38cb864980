#include "ovseg/training/losses.hpp"

#include "ovseg/numeric/ad_ops.hpp"

namespace ovseg {

template <typename T>
Var<T> loss_rec(const Var<T>& lr_feat, const Var<T>& image, const JbuVars<T>& up, const Var<T>& down_logits,
                int factor) {
  auto hr = simfeatup_upsample(lr_feat, image, up, factor);
  return ad::mse(lr_feat, downsample(hr, down_logits, factor));
}

template <typename T>
Var<T> loss_img(const Var<T>& hr_feat, const CrnVars<T>& crn, const Var<T>& image) {
  const auto& hv = hr_feat.value();
  const auto& iv = image.value();
  if (hv.rank() != 3 || iv.rank() != 3 || hv.dim(0) != iv.dim(0) || hv.dim(1) != iv.dim(1)) {
    throw ShapeError("loss_img: features " + shape_string(hv.shape()) + " and image " + shape_string(iv.shape()) +
                     " differ spatially");
  }
  return ad::mse(image, crn_reconstruct(hr_feat, crn));
}

template <typename T>
LossTerms<T> total_loss(const Var<T>& lr_feat, const Var<T>& image, const VarMap<T>& vars, int factor, int radius,
                        T gamma) {
  if (!(gamma >= T(0))) throw ArgumentError("total_loss: gamma must be non-negative");
  auto hr = simfeatup_upsample(lr_feat, image, JbuVars<T>::from(vars, radius), factor);
  auto rec = ad::mse(lr_feat, downsample(hr, lookup(vars, "down.logits"), factor));
  auto img = loss_img(hr, CrnVars<T>::from(vars), image);
  return {ad::add(rec, ad::scale(img, gamma)), rec, img};
}

LossValues evaluate_loss(const FeatureMap& lr_feat, const Tensor& image, const SimFeatUpParams& p, double gamma) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, p.to_params(), false);
  auto terms = total_loss(g.constant(lr_feat), g.constant(image), vars, p.factor, p.jbu.radius,
                          static_cast<float>(gamma));
  return {terms.total.value()[0], terms.rec.value()[0], terms.img.value()[0]};
}

double loss_rec(const FeatureMap& lr_feat, const Tensor& image, const JbuParams& up, const DownsamplerParams& down) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, up.to_params(), false);
  return loss_rec(g.constant(lr_feat), g.constant(image), JbuVars<float>::from(vars, up.radius),
                  g.constant(down.logits), down.factor)
      .value()[0];
}

double loss_img(const FeatureMap& hr_feat, const CrnParams& crn, const Tensor& image) {
  Graph<float> g;
  g.set_grad_enabled(false);
  auto vars = bind_params(g, crn.to_params(), false);
  return loss_img(g.constant(hr_feat), CrnVars<float>::from(vars), g.constant(image)).value()[0];
}

#define OVSEG_INSTANTIATE_LOSSES(T)                                                                   \
  template Var<T> loss_rec(const Var<T>&, const Var<T>&, const JbuVars<T>&, const Var<T>&, int);      \
  template Var<T> loss_img(const Var<T>&, const CrnVars<T>&, const Var<T>&);                          \
  template LossTerms<T> total_loss(const Var<T>&, const Var<T>&, const VarMap<T>&, int, int, T);

OVSEG_INSTANTIATE_LOSSES(float)
OVSEG_INSTANTIATE_LOSSES(double)

#undef OVSEG_INSTANTIATE_LOSSES

}  // namespace ovseg
