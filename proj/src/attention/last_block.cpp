#include "ovseg/attention/last_block.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "ovseg/numeric/kernels.hpp"
#include "ovseg/numeric/rng.hpp"
#include "ovseg/numeric/tensor_io.hpp"

namespace ovseg {
namespace k = kernels;

namespace {

Tensor apply_linear(const Tensor& x, const LinearParams& lin) { return k::linear(x, lin.weight, lin.bias); }

Tensor apply_embed(const Tensor& x, const EmbedParams& e) {
  return apply_linear(k::layer_norm_rows(x, e.norm.gamma, e.norm.beta).out, e.linear);
}

// Copies columns [c0, c0 + width) of a matrix.
Tensor columns(const Tensor& m, std::int64_t c0, std::int64_t width) {
  Tensor out({m.dim(0), width});
  for (std::int64_t i = 0; i < m.dim(0); ++i)
    for (std::int64_t j = 0; j < width; ++j) out.at(i, j) = m.at(i, c0 + j);
  return out;
}

void check_qkv(const Tensor& q, const Tensor& kk, const Tensor& v, int heads, const char* op) {
  require_rank(q, 2, op);
  if (q.shape() != kk.shape() || q.shape() != v.shape()) {
    throw ShapeError(std::string(op) + ": q, k, v shapes differ: " + shape_string(q.shape()) + ", " +
                     shape_string(kk.shape()) + ", " + shape_string(v.shape()));
  }
  if (heads <= 0 || q.dim(1) % heads != 0) throw ShapeError(std::string(op) + ": width not divisible by heads");
}

// softmax(a b^T * scale) v for one head.
Tensor attend(const Tensor& a, const Tensor& b, const Tensor& v, float scale) {
  return k::matmul(k::softmax_rows(k::scale(k::matmul_bt(a, b), scale)), v);
}

template <typename Fn>
Tensor per_head(const Tensor& q, const Tensor& kk, const Tensor& v, int heads, Fn&& fn) {
  if (heads == 1) return fn(q, kk, v);
  const auto hd = q.dim(1) / heads;
  Tensor out(q.shape());
  for (int h = 0; h < heads; ++h) {
    const auto r = fn(columns(q, h * hd, hd), columns(kk, h * hd, hd), columns(v, h * hd, hd));
    for (std::int64_t i = 0; i < q.dim(0); ++i)
      for (std::int64_t j = 0; j < hd; ++j) out.at(i, h * hd + j) = r.at(i, j);
  }
  return out;
}

nlohmann::json tensor_entry(const std::string& name) { return {{"name", name}, {"file", name + ".sfup"}}; }

std::vector<std::pair<std::string, Tensor*>> named_tensors(LastBlockParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto embed = [&](const std::string& pre, EmbedParams& e) {
    out.emplace_back(pre + ".norm.gamma", &e.norm.gamma);
    out.emplace_back(pre + ".norm.beta", &e.norm.beta);
    out.emplace_back(pre + ".linear.weight", &e.linear.weight);
    out.emplace_back(pre + ".linear.bias", &e.linear.bias);
  };
  embed("emb_q", p.q);
  embed("emb_k", p.k);
  embed("emb_v", p.v);
  out.emplace_back("ffn_norm.gamma", &p.ffn_norm.gamma);
  out.emplace_back("ffn_norm.beta", &p.ffn_norm.beta);
  out.emplace_back("ffn_in.weight", &p.ffn_in.weight);
  out.emplace_back("ffn_in.bias", &p.ffn_in.bias);
  out.emplace_back("ffn_out.weight", &p.ffn_out.weight);
  out.emplace_back("ffn_out.bias", &p.ffn_out.bias);
  out.emplace_back("proj.weight", &p.proj.weight);
  return out;
}

}  // namespace

void LastBlockParams::validate() const {
  if (proj.weight.rank() != 2) throw ShapeError("LastBlockParams: projection must be a matrix");
  const auto d = dim();
  auto check_vec = [&](const Tensor& t, std::int64_t n, const char* what) {
    if (t.rank() != 1 || t.dim(0) != n)
      throw ShapeError(std::string("LastBlockParams: ") + what + " has shape " + shape_string(t.shape()));
  };
  auto check_mat = [&](const Tensor& t, std::int64_t r, std::int64_t c, const char* what) {
    if (t.rank() != 2 || t.dim(0) != r || t.dim(1) != c)
      throw ShapeError(std::string("LastBlockParams: ") + what + " has shape " + shape_string(t.shape()));
  };
  for (const EmbedParams* e : {&q, &k, &v}) {
    check_vec(e->norm.gamma, d, "embedding norm gamma");
    check_vec(e->norm.beta, d, "embedding norm beta");
    check_mat(e->linear.weight, d, d, "embedding weight");
    check_vec(e->linear.bias, d, "embedding bias");
  }
  check_vec(ffn_norm.gamma, d, "ffn norm gamma");
  check_vec(ffn_norm.beta, d, "ffn norm beta");
  if (ffn_in.weight.rank() != 2 || ffn_in.weight.dim(0) != d) throw ShapeError("LastBlockParams: ffn_in weight");
  const auto hidden = ffn_in.weight.dim(1);
  check_vec(ffn_in.bias, hidden, "ffn_in bias");
  check_mat(ffn_out.weight, hidden, d, "ffn_out weight");
  check_vec(ffn_out.bias, d, "ffn_out bias");
  if (heads <= 0 || d % heads != 0) throw ShapeError("LastBlockParams: dim not divisible by heads");
  for (const Tensor* t : {&q.linear.weight, &k.linear.weight, &v.linear.weight, &ffn_in.weight, &ffn_out.weight,
                          &proj.weight}) {
    for (float x : t->data())
      if (!std::isfinite(x)) throw DataError("LastBlockParams: non-finite weight");
  }
}

LastBlockParams make_last_block(const EncoderConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(derive_seed(cfg.seed, 1));
  const std::int64_t d = cfg.dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto embed = [&] {
    return EmbedParams{{Tensor({d}, 1.0f), Tensor({d}, 0.0f)},
                       {uniform_tensor({d, d}, rng, -bound, bound), Tensor({d}, 0.0f)}};
  };
  LastBlockParams p;
  p.q = embed();
  p.k = embed();
  p.v = embed();
  p.ffn_norm = {Tensor({d}, 1.0f), Tensor({d}, 0.0f)};
  p.ffn_in = {uniform_tensor({d, 4 * d}, rng, -bound, bound), Tensor({4 * d}, 0.0f)};
  p.ffn_out = {uniform_tensor({4 * d, d}, rng, -bound, bound), Tensor({d}, 0.0f)};
  p.proj = {uniform_tensor({d, static_cast<std::int64_t>(cfg.proj_dim)}, rng, -bound, bound), Tensor()};
  p.heads = cfg.heads;
  return p;
}

void save_last_block(const std::filesystem::path& dir, const LastBlockParams& params) {
  params.validate();
  std::filesystem::create_directories(dir);
  auto p = params;
  nlohmann::json tensors = nlohmann::json::array();
  for (auto& [name, t] : named_tensors(p)) {
    if (t->empty()) continue;
    save_tensor(dir / (name + ".sfup"), *t);
    tensors.push_back(tensor_entry(name));
  }
  nlohmann::json index{{"format", "ovseg-last-block"}, {"version", 1}, {"heads", p.heads}, {"tensors", tensors}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << "\n";
}

LastBlockParams load_last_block(const std::filesystem::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw DataError("missing last-block index " + (dir / "index.json").string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "index.json").string() + ": invalid JSON: " + e.what());
  }
  if (index.value("format", "") != "ovseg-last-block") throw DataError(dir.string() + ": not a last-block directory");
  std::map<std::string, std::string> files;
  for (const auto& e : index.at("tensors")) files[e.at("name").get<std::string>()] = e.at("file").get<std::string>();
  LastBlockParams p;
  p.heads = index.value("heads", 1);
  for (auto& [name, t] : named_tensors(p)) {
    auto it = files.find(name);
    if (it == files.end()) {
      if (name == "proj.weight") throw DataError(dir.string() + ": missing tensor " + name);
      continue;
    }
    *t = load_tensor(dir / it->second);
  }
  p.validate();
  return p;
}

QkvTokens embed_qkv(const TokenSequence& x, const LastBlockParams& p) {
  require_rank(x.tokens, 2, "embed_qkv");
  if (x.dim() != p.dim()) {
    throw ShapeError("embed_qkv: token width " + std::to_string(x.dim()) + " does not match block width " +
                     std::to_string(p.dim()));
  }
  return {apply_embed(x.tokens, p.q), apply_embed(x.tokens, p.k), apply_embed(x.tokens, p.v)};
}

Tensor standard_attention(const Tensor& q, const Tensor& kk, const Tensor& v, int heads) {
  check_qkv(q, kk, v, heads, "standard_attention");
  const float scale = 1.0f / std::sqrt(static_cast<float>(q.dim(1) / heads));
  return per_head(q, kk, v, heads,
                  [scale](const Tensor& qh, const Tensor& kh, const Tensor& vh) { return attend(qh, kh, vh, scale); });
}

Tensor modulated_attention(const Tensor& q, const Tensor& kk, const Tensor& v, int heads) {
  check_qkv(q, kk, v, heads, "modulated_attention");
  const float scale = 1.0f / std::sqrt(static_cast<float>(q.dim(1) / heads));
  return per_head(q, kk, v, heads, [scale](const Tensor& qh, const Tensor& kh, const Tensor& vh) {
    auto out = attend(qh, qh, vh, scale);
    out = k::add(out, attend(kh, kh, vh, scale));
    return k::add(out, attend(vh, vh, vh, scale));
  });
}

FeatureMap tap_early_features(const TokenSequence& x, const LastBlockParams& p) {
  x.validate();
  if (x.dim() != p.dim()) throw ShapeError("tap_early_features: token width does not match projection");
  const auto patches = x.patch_map().reshaped({static_cast<std::int64_t>(x.h) * x.w, x.dim()});
  return apply_linear(patches, p.proj).reshaped({x.h, x.w, p.proj_dim()});
}

TokenSequence baseline_forward(const TokenSequence& x, const LastBlockParams& p) {
  x.validate();
  const auto qkv = embed_qkv(x, p);
  const auto attn = modulated_attention(qkv.q, qkv.k, qkv.v, p.heads);
  return TokenSequence{apply_linear(attn, p.proj), x.h, x.w};
}

TokenSequence vanilla_forward(const TokenSequence& x, const LastBlockParams& p) {
  x.validate();
  const auto qkv = embed_qkv(x, p);
  const auto y = k::add(x.tokens, standard_attention(qkv.q, qkv.k, qkv.v, p.heads));
  const auto normed = k::layer_norm_rows(y, p.ffn_norm.gamma, p.ffn_norm.beta).out;
  const auto ffn = apply_linear(k::gelu(apply_linear(normed, p.ffn_in)), p.ffn_out);
  const auto z = k::add(y, ffn);
  return TokenSequence{apply_linear(z, p.proj), x.h, x.w};
}

}  // namespace ovseg
