#include "ovseg/training/trainer.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include "ovseg/attention/last_block.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/numeric/rng.hpp"
#include "ovseg/training/adam.hpp"
#include "ovseg/upsampler/checkpoint.hpp"

namespace ovseg {
namespace fs = std::filesystem;

namespace {

Tensor crop_image(const Tensor& image, std::int64_t y0, std::int64_t x0, std::int64_t size) {
  Tensor out({size, size, 3});
  for (std::int64_t i = 0; i < size; ++i) {
    const float* src = image.ptr() + ((y0 + i) * image.dim(1) + x0) * 3;
    std::copy(src, src + size * 3, out.ptr() + i * size * 3);
  }
  return out;
}

LossValues eval_set_loss(const std::vector<View>& set, const SimFeatUpParams& p, double gamma) {
  LossValues acc;
  for (const auto& v : set) {
    const auto l = evaluate_loss(v.features, v.image, p, gamma);
    acc.total += l.total;
    acc.rec += l.rec;
    acc.img += l.img;
  }
  const double n = static_cast<double>(set.size());
  return {acc.total / n, acc.rec / n, acc.img / n};
}

}  // namespace

void TrainConfig::validate(const EncoderConfig& enc) const {
  if (!(gamma >= 0.0)) throw ArgumentError("gamma must be non-negative");
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
  if (steps < 0) throw ArgumentError("steps must be non-negative");
  if (batch < 1) throw ArgumentError("batch must be at least 1");
  if (eval_crops < 1) throw ArgumentError("eval_crops must be at least 1");
  if (crop <= 0 || crop % enc.patch_size != 0)
    throw ArgumentError("crop " + std::to_string(crop) + " is not a multiple of the patch size " +
                        std::to_string(enc.patch_size));
  upsample_stages(factor);
  if (factor != enc.patch_size)
    throw ArgumentError("upsample factor " + std::to_string(factor) + " must equal the patch size " +
                        std::to_string(enc.patch_size));
}

std::vector<Tensor> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Tensor> images;
  for (const auto& f : files) images.push_back(read_ppm(f));
  return images;
}

FeatureFn early_feature_fn(const EncoderConfig& enc) {
  auto encoder = std::make_shared<const ToyEncoder>(enc);
  auto block = std::make_shared<const LastBlockParams>(make_last_block(enc));
  return [encoder, block](const Tensor& image) { return tap_early_features(encoder->encode(image), *block); };
}

TrainReport train_upsampler(const std::vector<Tensor>& corpus, const TrainConfig& cfg, const EncoderConfig& enc,
                            const StepCallback& on_step) {
  enc.validate();
  cfg.validate(enc);
  if (corpus.empty()) throw DataError("training corpus is empty");
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& im = corpus[n];
    if (im.rank() != 3 || im.dim(2) != 3) throw DataError("corpus image " + std::to_string(n) + " is not RGB");
    if (im.dim(0) < cfg.crop || im.dim(1) < cfg.crop) {
      throw DataError("corpus image " + std::to_string(n) + " (" + shape_string(im.shape()) +
                      ") is smaller than the crop " + std::to_string(cfg.crop));
    }
  }

  const auto features = early_feature_fn(enc);
  TrainReport report;
  report.params = SimFeatUpParams::init(derive_seed(cfg.seed, 1), enc.proj_dim, cfg.factor, cfg.guide_width,
                                        cfg.radius, cfg.crn_hidden);
  auto& p = report.params;

  std::vector<View> eval_set;
  for (int n = 0; n < cfg.eval_crops; ++n) {
    const auto& im = corpus[static_cast<std::size_t>(n) % corpus.size()];
    auto c = crop_image(im, (im.dim(0) - cfg.crop) / 2, (im.dim(1) - cfg.crop) / 2, cfg.crop);
    eval_set.push_back({c, features(c)});
  }
  report.initial_eval = eval_set_loss(eval_set, p, cfg.gamma);

  Adam adam(AdamConfig{cfg.lr});
  SplitMix64 rng(derive_seed(cfg.seed, 2));
  auto values = p.to_params();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<View> views;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& im = corpus[rng.below(corpus.size())];
      const auto y0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(im.dim(0) - cfg.crop + 1)));
      const auto x0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(im.dim(1) - cfg.crop + 1)));
      auto v = augment_views(crop_image(im, y0, x0, cfg.crop), features, cfg.augment, rng.next(), enc.patch_size);
      for (auto& x : v) views.push_back(std::move(x));
    }

    std::map<std::string, std::vector<double>> grad_sum;
    StepLoss loss{step, 0.0, 0.0, 0.0};
    for (const auto& v : views) {
      Graph<float> g;
      auto vars = bind_params(g, values);
      auto terms = total_loss(g.constant(v.features), g.constant(v.image), vars, cfg.factor, cfg.radius,
                              static_cast<float>(cfg.gamma));
      loss.total += terms.total.value()[0];
      loss.rec += terms.rec.value()[0];
      loss.img += terms.img.value()[0];
      auto result = backward(g, terms.total);
      for (const auto& [name, grad] : result.grads) {
        auto& acc = grad_sum[name];
        acc.resize(grad.size(), 0.0);
        for (std::size_t i = 0; i < grad.size(); ++i) acc[i] += grad[i];
      }
    }
    const double inv = 1.0 / static_cast<double>(views.size());
    loss.total *= inv;
    loss.rec *= inv;
    loss.img *= inv;
    std::map<std::string, Tensor> grads;
    for (const auto& [name, acc] : grad_sum) {
      Tensor t(values.at(name).shape());
      for (std::size_t i = 0; i < acc.size(); ++i) t[i] = static_cast<float>(acc[i] * inv);
      grads.emplace(name, std::move(t));
    }
    adam.step(values, grads);
    report.series.push_back(loss);
    if (on_step) on_step(loss);
  }
  p.assign(values);
  report.final_eval = eval_set_loss(eval_set, p, cfg.gamma);
  return report;
}

TrainReport train_upsampler(const fs::path& corpus_dir, const TrainConfig& cfg, const EncoderConfig& enc,
                            const fs::path& out_dir, const StepCallback& on_step) {
  auto corpus = load_corpus(corpus_dir);
  if (corpus.empty()) throw DataError("no .ppm images in corpus " + corpus_dir.string());
  auto report = train_upsampler(corpus, cfg, enc, on_step);
  Checkpoint ckpt{report.params, enc, nlohmann::json::object()};
  ckpt.training = {{"steps", cfg.steps},
                   {"batch", cfg.batch},
                   {"crop", cfg.crop},
                   {"gamma", cfg.gamma},
                   {"lr", cfg.lr},
                   {"seed", cfg.seed},
                   {"augment", {{"flip", cfg.augment.flip}, {"translate", cfg.augment.translate},
                                {"zoom", cfg.augment.zoom}}},
                   {"initial_eval_loss", report.initial_eval.total},
                   {"final_eval_loss", report.final_eval.total}};
  save_checkpoint(out_dir, ckpt);
  report.checkpoint = out_dir;
  return report;
}

}  // namespace ovseg
