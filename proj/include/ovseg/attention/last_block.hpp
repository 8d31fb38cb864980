#pragma once

#include <cstdint>
#include <filesystem>

#include "ovseg/features/tokens.hpp"
#include "ovseg/features/toy_encoder.hpp"

namespace ovseg {

struct LayerNormParams {
  Tensor gamma;  // dim
  Tensor beta;   // dim
};

struct LinearParams {
  Tensor weight;  // in x out
  Tensor bias;    // out, or empty for no bias
};

/// Layer norm followed by a linear map: one of Emb_q, Emb_k, Emb_v.
struct EmbedParams {
  LayerNormParams norm;
  LinearParams linear;
};

/// Weights of the frozen last transformer block plus the projection into the
/// multimodal space.
struct LastBlockParams {
  EmbedParams q, k, v;
  LayerNormParams ffn_norm;
  LinearParams ffn_in, ffn_out;
  LinearParams proj;  // dim x proj_dim, no bias
  int heads = 1;

  std::int64_t dim() const { return proj.weight.dim(0); }
  std::int64_t proj_dim() const { return proj.weight.dim(1); }
  void validate() const;
};

/// Seeded last-block weights matching the toy encoder: uniform(-1/sqrt(d),
/// 1/sqrt(d)) from SplitMix64(derive_seed(cfg.seed, 1)), zero biases,
/// identity norms, FFN width 4d.
LastBlockParams make_last_block(const EncoderConfig& cfg);

/// Directory of tensor files plus index.json.
void save_last_block(const std::filesystem::path& dir, const LastBlockParams& p);
LastBlockParams load_last_block(const std::filesystem::path& dir);

struct QkvTokens {
  Tensor q, k, v;
};

QkvTokens embed_qkv(const TokenSequence& x, const LastBlockParams& p);

/// softmax(q k^T / sqrt(d_head)) v, per head.
Tensor standard_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads = 1);

/// Sum over i in {q, k, v} of softmax(i i^T / sqrt(d_head)) v, per head.
Tensor modulated_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads = 1);

/// Proj(X[1:]) reshaped to h x w x proj_dim. The global token is dropped.
FeatureMap tap_early_features(const TokenSequence& x, const LastBlockParams& p);

/// O = Proj(M-SA(q, k, v)) with the residual and FFN removed. Row 0 stays the
/// global token and goes through the same path as the patches.
TokenSequence baseline_forward(const TokenSequence& x, const LastBlockParams& p);

/// Unmodified block: y = X + SA(q, k, v), z = y + FFN(LN(y)), O = Proj(z).
TokenSequence vanilla_forward(const TokenSequence& x, const LastBlockParams& p);

}  // namespace ovseg
