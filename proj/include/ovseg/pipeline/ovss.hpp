#pragma once

// Inference path: encode, modulated last block, SimFeatUp, global-bias
// subtraction, text classification and sliding-window stitching.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ovseg/attention/last_block.hpp"
#include "ovseg/features/text_bank.hpp"
#include "ovseg/features/toy_encoder.hpp"
#include "ovseg/upsampler/checkpoint.hpp"

namespace ovseg {

struct InferenceConfig {
  double lambda = 0.3;
  int window = 224;
  int stride = 112;
  int long_side = 448;
  int upsample_factor = 0;  // 0: the checkpoint's factor
  bool early_tap = false;   // upsample Proj(X) instead of the modulated block output

  void validate() const;
};

/// Frozen backbone plus trained upsampler.
struct OvssModel {
  ToyEncoder encoder;
  LastBlockParams block;
  JbuParams jbu;
  int factor = 8;

  static OvssModel from_checkpoint(const Checkpoint& ckpt);
  int patch_size() const { return encoder.config().patch_size; }
};

/// o_i - lambda * o_cls for every position of an h x w x c map.
FeatureMap subtract_global(const FeatureMap& features, std::span<const float> global, double lambda);

/// Same on a token sequence; row 0 (the global token) is left as is.
TokenSequence subtract_global(const TokenSequence& seq, double lambda);

/// Cosine similarity of every L2-normalised pixel feature with every
/// subclass embedding; a class scores the max over its subclasses.
/// Zero-norm pixels score 0 everywhere and are counted in `zero_norm`.
Tensor classify_patches(const FeatureMap& features, const TextEmbeddingBank& bank,
                        std::int64_t* zero_norm = nullptr);

/// Output size of resize_long_side, as {height, width}.
std::pair<std::int64_t, std::int64_t> long_side_size(std::int64_t h, std::int64_t w, int target, int patch);

/// Bilinear resize so the long side equals `target` and the short side is
/// rounded to the nearest multiple of `patch` (at least one patch).
Tensor resize_long_side(const Tensor& image, int target, int patch);

/// Window-sized class logits (H x W x K).
Tensor segment_window(const Tensor& window_image, const OvssModel& model, const TextEmbeddingBank& bank,
                      const InferenceConfig& cfg);

/// Window origins along one axis: multiples of stride, the last one clamped
/// so the final window ends at the edge. A dim below the window yields {0}.
std::vector<std::int64_t> window_origins(std::int64_t dim, int window, int stride);

struct SlideResult {
  Tensor logits;                  // H x W x K, mean over covering windows
  std::vector<int> coverage;      // H x W window counts
  std::vector<std::pair<std::int64_t, std::int64_t>> origins;  // (y, x)
  bool padded = false;            // image smaller than the window on some axis
};

using WindowFn = std::function<Tensor(const Tensor& window_image)>;

/// Stitches per-window logits. Windows are visited in row-major origin
/// order and summed in that order, so the result is reproducible.
SlideResult slide_inference(const Tensor& image, const WindowFn& window_fn, int window, int stride);

SlideResult slide_inference(const Tensor& image, const OvssModel& model, const TextEmbeddingBank& bank,
                            const InferenceConfig& cfg);

struct SegmentationMask {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::int32_t> labels;  // row-major class indices
  std::vector<std::string> classes;
};

/// Per-pixel argmax; ties go to the lowest class index.
SegmentationMask argmax_mask(const Tensor& logits, std::vector<std::string> classes = {});

/// "<mask stem>.classes.json" next to the mask.
std::filesystem::path class_table_path(const std::filesystem::path& mask_path);

/// Binary PGM with pixel value = class index, plus the JSON class table.
void write_mask(const std::filesystem::path& path, const SegmentationMask& mask);

struct SegmentOutput {
  SegmentationMask mask;
  SlideResult slide;
  std::int64_t resized_height = 0;
  std::int64_t resized_width = 0;
};

/// resize_long_side followed by slide_inference and argmax.
SegmentOutput segment_image(const Tensor& image, const OvssModel& model, const TextEmbeddingBank& bank,
                            const InferenceConfig& cfg);

}  // namespace ovseg
