#include "ovseg/pipeline/ovss.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/numeric/kernels.hpp"

namespace ovseg {
namespace fs = std::filesystem;

namespace {

FeatureMap nearest_upsample(const FeatureMap& x, std::int64_t scale) {
  const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  FeatureMap out({h * scale, w * scale, c});
  for (std::int64_t i = 0; i < h * scale; ++i)
    for (std::int64_t j = 0; j < w * scale; ++j) {
      const float* src = x.ptr() + ((i / scale) * w + j / scale) * c;
      std::copy(src, src + c, out.ptr() + (i * w * scale + j) * c);
    }
  return out;
}

Tensor crop_map(const Tensor& x, std::int64_t y0, std::int64_t x0, std::int64_t h, std::int64_t w) {
  const std::int64_t width = x.dim(1), c = x.dim(2);
  Tensor out({h, w, c});
  for (std::int64_t i = 0; i < h; ++i) {
    const float* src = x.ptr() + ((y0 + i) * width + x0) * c;
    std::copy(src, src + w * c, out.ptr() + i * w * c);
  }
  return out;
}

}  // namespace

void InferenceConfig::validate() const {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be non-negative");
  if (window <= 0 || stride <= 0) throw ArgumentError("window and stride must be positive");
  if (stride > window) throw ArgumentError("stride must not exceed the window");
  if (long_side <= 0) throw ArgumentError("long side must be positive");
  if (upsample_factor < 0) throw ArgumentError("upsample factor must be non-negative");
}

OvssModel OvssModel::from_checkpoint(const Checkpoint& ckpt) {
  return OvssModel{ToyEncoder(ckpt.encoder), make_last_block(ckpt.encoder), ckpt.params.jbu, ckpt.params.factor};
}

FeatureMap subtract_global(const FeatureMap& features, std::span<const float> global, double lambda) {
  require_rank(features, 3, "subtract_global");
  const std::int64_t c = features.dim(2);
  if (static_cast<std::int64_t>(global.size()) != c)
    throw ShapeError("subtract_global: global token width " + std::to_string(global.size()) +
                     " differs from feature width " + std::to_string(c));
  FeatureMap out = features;
  const auto l = static_cast<float>(lambda);
  const std::int64_t pixels = features.dim(0) * features.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p)
    for (std::int64_t k = 0; k < c; ++k) out[p * c + k] -= l * global[k];
  return out;
}

TokenSequence subtract_global(const TokenSequence& seq, double lambda) {
  seq.validate();
  auto patches = subtract_global(seq.patch_map(), seq.global_token(), lambda);
  return TokenSequence::from_parts(seq.global_token(), patches);
}

Tensor classify_patches(const FeatureMap& features, const TextEmbeddingBank& bank, std::int64_t* zero_norm) {
  require_rank(features, 3, "classify_patches");
  bank.validate();
  const std::int64_t c = features.dim(2);
  if (c != bank.width())
    throw ShapeError("classify_patches: feature width " + std::to_string(c) + " differs from text embedding width " +
                     std::to_string(bank.width()));
  const std::int64_t pixels = features.dim(0) * features.dim(1);
  const auto k = static_cast<std::int64_t>(bank.class_count());
  Tensor logits({features.dim(0), features.dim(1), k});
  std::int64_t zeros = 0;
#pragma omp parallel for schedule(static) reduction(+ : zeros) if (pixels * c * k > 16384)
  for (std::int64_t p = 0; p < pixels; ++p) {
    const float* f = features.ptr() + p * c;
    double norm = 0.0;
    for (std::int64_t t = 0; t < c; ++t) norm += static_cast<double>(f[t]) * f[t];
    norm = std::sqrt(norm);
    float* out = logits.ptr() + p * k;
    if (norm == 0.0) {
      ++zeros;
      continue;
    }
    for (std::int64_t cls = 0; cls < k; ++cls) {
      double best = -2.0;
      for (const auto& sub : bank.classes[cls].subclasses) {
        double dot = 0.0;
        for (std::int64_t t = 0; t < c; ++t) dot += static_cast<double>(f[t]) * sub.embedding[t];
        best = std::max(best, dot / norm);
      }
      out[cls] = static_cast<float>(std::clamp(best, -1.0, 1.0));
    }
  }
  if (zero_norm) *zero_norm += zeros;
  return logits;
}

std::pair<std::int64_t, std::int64_t> long_side_size(std::int64_t h, std::int64_t w, int target, int patch) {
  if (target <= 0 || patch <= 0) throw ArgumentError("long side target and patch size must be positive");
  if (h <= 0 || w <= 0) throw ShapeError("long_side_size: empty image");
  const std::int64_t longer = std::max(h, w), shorter = std::min(h, w);
  const double scaled = static_cast<double>(shorter) * target / static_cast<double>(longer);
  const std::int64_t rounded = std::max<std::int64_t>(patch, std::llround(scaled / patch) * patch);
  const std::int64_t s = std::min<std::int64_t>(rounded, target);
  return h >= w ? std::pair{static_cast<std::int64_t>(target), s} : std::pair{s, static_cast<std::int64_t>(target)};
}

Tensor resize_long_side(const Tensor& image, int target, int patch) {
  require_rank(image, 3, "resize_long_side");
  const auto [h, w] = long_side_size(image.dim(0), image.dim(1), target, patch);
  if (h == image.dim(0) && w == image.dim(1)) return image;
  return kernels::resize_bilinear(image, h, w);
}

Tensor segment_window(const Tensor& window_image, const OvssModel& model, const TextEmbeddingBank& bank,
                      const InferenceConfig& cfg) {
  require_rank(window_image, 3, "segment_window");
  const int patch = model.patch_size();
  const std::int64_t wh = window_image.dim(0), ww = window_image.dim(1);
  if (wh % patch != 0 || ww % patch != 0)
    throw ShapeError("segment_window: window " + shape_string(window_image.shape()) +
                     " is not divisible by the patch size " + std::to_string(patch));
  const int factor = cfg.upsample_factor > 0 ? cfg.upsample_factor : model.factor;
  upsample_stages(factor);
  if (factor > patch || patch % factor != 0)
    throw ArgumentError("upsample factor " + std::to_string(factor) + " does not divide the patch size " +
                        std::to_string(patch));

  const TokenSequence tokens = model.encoder.encode(window_image);
  FeatureMap patches;
  std::vector<float> global;
  if (cfg.early_tap) {
    patches = tap_early_features(tokens, model.block);
    Tensor row0({1, tokens.dim()}, std::vector<float>(tokens.global_token().begin(), tokens.global_token().end()));
    global = kernels::matmul(row0, model.block.proj.weight).vec();
  } else {
    const TokenSequence out = baseline_forward(tokens, model.block);
    patches = out.patch_map();
    global.assign(out.global_token().begin(), out.global_token().end());
  }

  FeatureMap hr = patches;
  if (factor > 1) {
    const std::int64_t gh = patches.dim(0) * factor, gw = patches.dim(1) * factor;
    const Tensor guide =
        gh == wh && gw == ww ? window_image : kernels::resize_bilinear(window_image, gh, gw);
    hr = simfeatup_upsample(patches, guide, model.jbu, factor);
  }
  if (factor < patch) hr = nearest_upsample(hr, patch / factor);
  return classify_patches(subtract_global(hr, global, cfg.lambda), bank);
}

std::vector<std::int64_t> window_origins(std::int64_t dim, int window, int stride) {
  if (window <= 0 || stride <= 0) throw ArgumentError("window and stride must be positive");
  if (dim <= window) return {0};
  std::vector<std::int64_t> origins;
  for (std::int64_t o = 0; o + window < dim; o += stride) origins.push_back(o);
  origins.push_back(dim - window);
  return origins;
}

SlideResult slide_inference(const Tensor& image, const WindowFn& window_fn, int window, int stride) {
  require_rank(image, 3, "slide_inference");
  const std::int64_t h = image.dim(0), w = image.dim(1);
  SlideResult r;
  Tensor source = image;
  if (h < window || w < window) {
    const auto ph = std::max<std::int64_t>(h, window), pw = std::max<std::int64_t>(w, window);
    source = kernels::pad2d(image, 0, static_cast<int>(ph - h), 0, static_cast<int>(pw - w),
                            kernels::PadMode::kReplicate);
    r.padded = true;
  }
  const auto ys = window_origins(source.dim(0), window, stride);
  const auto xs = window_origins(source.dim(1), window, stride);
  Tensor sum;
  std::vector<int> count(static_cast<std::size_t>(h * w), 0);
  for (auto y0 : ys)
    for (auto x0 : xs) {
      r.origins.emplace_back(y0, x0);
      const Tensor logits = window_fn(crop_map(source, y0, x0, window, window));
      if (logits.rank() != 3 || logits.dim(0) != window || logits.dim(1) != window)
        throw ShapeError("slide_inference: window function returned " + shape_string(logits.shape()));
      const std::int64_t k = logits.dim(2);
      if (sum.empty()) sum = Tensor({h, w, k});
      if (sum.dim(2) != k) throw ShapeError("slide_inference: class count changed between windows");
      for (std::int64_t i = 0; i < window && y0 + i < h; ++i)
        for (std::int64_t j = 0; j < window && x0 + j < w; ++j) {
          const std::int64_t p = (y0 + i) * w + x0 + j;
          ++count[p];
          const float* src = logits.ptr() + (i * window + j) * k;
          float* dst = sum.ptr() + p * k;
          for (std::int64_t t = 0; t < k; ++t) dst[t] += src[t];
        }
    }
  const std::int64_t k = sum.dim(2);
  for (std::int64_t p = 0; p < h * w; ++p) {
    const float inv = 1.0f / static_cast<float>(count[p]);
    for (std::int64_t t = 0; t < k; ++t) sum[p * k + t] = count[p] == 1 ? sum[p * k + t] : sum[p * k + t] * inv;
  }
  r.logits = std::move(sum);
  r.coverage = std::move(count);
  return r;
}

SlideResult slide_inference(const Tensor& image, const OvssModel& model, const TextEmbeddingBank& bank,
                            const InferenceConfig& cfg) {
  cfg.validate();
  return slide_inference(
      image, [&](const Tensor& win) { return segment_window(win, model, bank, cfg); }, cfg.window, cfg.stride);
}

SegmentationMask argmax_mask(const Tensor& logits, std::vector<std::string> classes) {
  require_rank(logits, 3, "argmax_mask");
  const std::int64_t h = logits.dim(0), w = logits.dim(1), k = logits.dim(2);
  if (!classes.empty() && static_cast<std::int64_t>(classes.size()) != k)
    throw ShapeError("argmax_mask: " + std::to_string(classes.size()) + " class names for " + std::to_string(k) +
                     " channels");
  SegmentationMask m{h, w, std::vector<std::int32_t>(static_cast<std::size_t>(h * w)), std::move(classes)};
  for (std::int64_t p = 0; p < h * w; ++p) {
    const float* row = logits.ptr() + p * k;
    std::int32_t best = 0;
    for (std::int64_t t = 1; t < k; ++t)
      if (row[t] > row[best]) best = static_cast<std::int32_t>(t);
    m.labels[p] = best;
  }
  return m;
}

fs::path class_table_path(const fs::path& mask_path) {
  fs::path p = mask_path;
  p.replace_extension(".classes.json");
  return p;
}

void write_mask(const fs::path& path, const SegmentationMask& mask) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (mask.classes.size() > 256) throw ArgumentError("PGM masks hold at most 256 classes");
  GrayImage img{static_cast<int>(mask.height), static_cast<int>(mask.width), {}};
  img.pixels.reserve(mask.labels.size());
  for (auto l : mask.labels) {
    if (l < 0 || l > 255) throw ArgumentError("mask label out of PGM range");
    img.pixels.push_back(static_cast<std::uint8_t>(l));
  }
  write_pgm(path, img);
  nlohmann::json table = nlohmann::json::array();
  for (std::size_t i = 0; i < mask.classes.size(); ++i) table.push_back({{"index", i}, {"name", mask.classes[i]}});
  std::ofstream out(class_table_path(path), std::ios::trunc);
  if (!out) throw DataError("cannot write " + class_table_path(path).string());
  out << nlohmann::json{{"classes", table}}.dump(2) << "\n";
}

SegmentOutput segment_image(const Tensor& image, const OvssModel& model, const TextEmbeddingBank& bank,
                            const InferenceConfig& cfg) {
  cfg.validate();
  require_rank(image, 3, "segment_image");
  const Tensor resized = resize_long_side(image, cfg.long_side, model.patch_size());
  SegmentOutput out;
  out.resized_height = resized.dim(0);
  out.resized_width = resized.dim(1);
  out.slide = slide_inference(resized, model, bank, cfg);
  // Predictions are reported on the input grid so they line up with masks.
  const Tensor logits = resized.dim(0) == image.dim(0) && resized.dim(1) == image.dim(1)
                            ? out.slide.logits
                            : kernels::resize_bilinear(out.slide.logits, image.dim(0), image.dim(1));
  out.mask = argmax_mask(logits, bank.class_names());
  return out;
}

}  // namespace ovseg
