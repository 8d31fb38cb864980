#pragma once

#include <cstdint>
#include <vector>

#include "ovseg/features/tokens.hpp"

namespace ovseg {

struct EncoderConfig {
  int patch_size = 8;
  int depth = 2;    // transformer blocks before the last block
  int dim = 32;     // token width d
  int proj_dim = 16;  // multimodal width c, c < d
  int heads = 1;    // attention heads of the last block
  std::uint64_t seed = 0x5E6EA27ULL;

  void validate() const;
};

/// Deterministic ViT-style stand-in for the frozen image backbone up to the
/// input of its last block.
///
/// Weights come from SplitMix64(cfg.seed) in this order: patch projection
/// (p*p*3 x d), global token (d), then per block Wq, Wk, Wv, Wo (d x d),
/// W1 (d x 4d), W2 (4d x d). Every entry is uniform(-1/sqrt(d), 1/sqrt(d));
/// biases are zero and layer norms start as identity. Blocks are pre-norm
/// single-head attention followed by a GELU feed-forward, both residual.
class ToyEncoder {
 public:
  explicit ToyEncoder(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  /// image: H x W x 3 in [-1, 1] with H and W divisible by the patch size.
  TokenSequence encode(const Tensor& image) const;

  /// Patch embedding only (no global token, no blocks): h x w x d.
  FeatureMap embed_patches(const Tensor& image) const;

 private:
  struct Block {
    Tensor wq, wk, wv, wo, w1, w2;
  };

  EncoderConfig cfg_;
  Tensor patch_proj_;
  Tensor global_token_;
  std::vector<Block> blocks_;
};

TokenSequence toy_encode(const Tensor& image, const EncoderConfig& cfg);

}  // namespace ovseg
