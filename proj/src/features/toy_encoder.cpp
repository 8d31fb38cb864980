#include "ovseg/features/toy_encoder.hpp"

#include <cmath>

#include "ovseg/numeric/kernels.hpp"
#include "ovseg/numeric/rng.hpp"

namespace ovseg {

void TokenSequence::validate() const {
  require_rank(tokens, 2, "TokenSequence");
  if (h <= 0 || w <= 0 || count() != 1 + static_cast<std::int64_t>(h) * w) {
    throw ShapeError("TokenSequence: " + std::to_string(count()) + " tokens do not match grid " +
                     std::to_string(h) + "x" + std::to_string(w) + " plus a global token");
  }
}

FeatureMap TokenSequence::patch_map() const {
  validate();
  const auto d = dim();
  std::vector<float> data(tokens.data().begin() + d, tokens.data().end());
  return FeatureMap({h, w, d}, std::move(data));
}

TokenSequence TokenSequence::from_parts(std::span<const float> global, const FeatureMap& patches) {
  require_rank(patches, 3, "TokenSequence::from_parts");
  const auto d = patches.dim(2);
  if (static_cast<std::int64_t>(global.size()) != d)
    throw ShapeError("TokenSequence::from_parts: global token width differs from patch width");
  std::vector<float> data(global.begin(), global.end());
  data.insert(data.end(), patches.data().begin(), patches.data().end());
  TokenSequence seq{Tensor({1 + patches.dim(0) * patches.dim(1), d}, std::move(data)),
                    static_cast<int>(patches.dim(0)), static_cast<int>(patches.dim(1))};
  return seq;
}

void EncoderConfig::validate() const {
  if (patch_size <= 0 || depth < 0 || dim <= 0 || proj_dim <= 0 || heads <= 0)
    throw ArgumentError("encoder config: sizes must be positive");
  if (proj_dim >= dim) throw ArgumentError("encoder config: proj_dim must be smaller than dim");
  if (dim % heads != 0) throw ArgumentError("encoder config: dim must be divisible by heads");
}

ToyEncoder::ToyEncoder(EncoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  SplitMix64 rng(cfg_.seed);
  const std::int64_t d = cfg_.dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  const std::int64_t patch_in = static_cast<std::int64_t>(cfg_.patch_size) * cfg_.patch_size * 3;
  patch_proj_ = uniform_tensor({patch_in, d}, rng, -bound, bound);
  global_token_ = uniform_tensor({d}, rng, -bound, bound);
  for (int b = 0; b < cfg_.depth; ++b) {
    Block blk;
    blk.wq = uniform_tensor({d, d}, rng, -bound, bound);
    blk.wk = uniform_tensor({d, d}, rng, -bound, bound);
    blk.wv = uniform_tensor({d, d}, rng, -bound, bound);
    blk.wo = uniform_tensor({d, d}, rng, -bound, bound);
    blk.w1 = uniform_tensor({d, 4 * d}, rng, -bound, bound);
    blk.w2 = uniform_tensor({4 * d, d}, rng, -bound, bound);
    blocks_.push_back(std::move(blk));
  }
}

FeatureMap ToyEncoder::embed_patches(const Tensor& image) const {
  require_rank(image, 3, "toy_encode");
  if (image.dim(2) != 3) throw ShapeError("toy_encode: expected 3 channels, got " + shape_string(image.shape()));
  const int p = cfg_.patch_size;
  if (image.dim(0) % p != 0 || image.dim(1) % p != 0) {
    throw ShapeError("toy_encode: image " + shape_string(image.shape()) + " is not divisible by patch size " +
                     std::to_string(p));
  }
  for (float v : image.data()) {
    if (!(v >= -1.0f && v <= 1.0f)) throw ArgumentError("toy_encode: image values must lie in [-1, 1]");
  }
  const std::int64_t gh = image.dim(0) / p, gw = image.dim(1) / p;
  const std::int64_t patch_in = static_cast<std::int64_t>(p) * p * 3;
  Tensor patches({gh * gw, patch_in});
  for (std::int64_t gy = 0; gy < gh; ++gy)
    for (std::int64_t gx = 0; gx < gw; ++gx) {
      float* dst = patches.ptr() + (gy * gw + gx) * patch_in;
      for (int py = 0; py < p; ++py) {
        const float* src = image.ptr() + ((gy * p + py) * image.dim(1) + gx * p) * 3;
        std::copy(src, src + 3 * p, dst + py * 3 * p);
      }
    }
  return kernels::matmul(patches, patch_proj_).reshaped({gh, gw, cfg_.dim});
}

TokenSequence ToyEncoder::encode(const Tensor& image) const {
  const auto patches = embed_patches(image);
  auto seq = TokenSequence::from_parts(global_token_.data(), patches);
  const Tensor none;
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(cfg_.dim));
  Tensor x = std::move(seq.tokens);
  for (const auto& blk : blocks_) {
    const auto h1 = kernels::layer_norm_rows(x, none, none).out;
    const auto q = kernels::matmul(h1, blk.wq);
    const auto k = kernels::matmul(h1, blk.wk);
    const auto v = kernels::matmul(h1, blk.wv);
    const auto attn = kernels::softmax_rows(kernels::scale(kernels::matmul_bt(q, k), inv_sqrt_d));
    x = kernels::add(x, kernels::matmul(kernels::matmul(attn, v), blk.wo));
    const auto h2 = kernels::layer_norm_rows(x, none, none).out;
    x = kernels::add(x, kernels::matmul(kernels::gelu(kernels::matmul(h2, blk.w1)), blk.w2));
  }
  seq.tokens = std::move(x);
  return seq;
}

TokenSequence toy_encode(const Tensor& image, const EncoderConfig& cfg) { return ToyEncoder(cfg).encode(image); }

}  // namespace ovseg
