#pragma once

#include "ovseg/numeric/autodiff.hpp"
#include "ovseg/upsampler/simfeatup.hpp"

namespace ovseg {

/// MSE(lr, down(up(lr, image))) with the downsampler given by its logits.
template <typename T>
Var<T> loss_rec(const Var<T>& lr_feat, const Var<T>& image, const JbuVars<T>& up, const Var<T>& down_logits,
                int factor);

/// MSE(image, CRN(hr)).
template <typename T>
Var<T> loss_img(const Var<T>& hr_feat, const CrnVars<T>& crn, const Var<T>& image);

template <typename T>
struct LossTerms {
  Var<T> total, rec, img;
};

/// rec + gamma * img, sharing one upsampling pass between the two terms.
/// `vars` must hold the "jbu.", "crn." and "down." parameters.
template <typename T>
LossTerms<T> total_loss(const Var<T>& lr_feat, const Var<T>& image, const VarMap<T>& vars, int factor, int radius,
                        T gamma);

struct LossValues {
  double total = 0.0;
  double rec = 0.0;
  double img = 0.0;
};

/// Forward-only evaluation in float.
LossValues evaluate_loss(const FeatureMap& lr_feat, const Tensor& image, const SimFeatUpParams& p, double gamma);
double loss_rec(const FeatureMap& lr_feat, const Tensor& image, const JbuParams& up, const DownsamplerParams& down);
double loss_img(const FeatureMap& hr_feat, const CrnParams& crn, const Tensor& image);

}  // namespace ovseg
