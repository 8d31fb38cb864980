#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "ovseg/attention/last_block.hpp"
#include "ovseg/error.hpp"
#include "ovseg/features/toy_encoder.hpp"
#include "ovseg/numeric/kernels.hpp"

using namespace ovseg;

namespace {

LastBlockParams small_block(int dim, int proj_dim, std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.dim = dim;
  cfg.proj_dim = proj_dim;
  cfg.seed = seed;
  return make_last_block(cfg);
}

void identity_embed(EmbedParams& e, int dim) {
  e.norm.gamma = Tensor({dim}, 1.0f);
  e.norm.beta = Tensor({dim}, 0.0f);
  e.linear.weight = Tensor({dim, dim}, 0.0f);
  for (int i = 0; i < dim; ++i) e.linear.weight.at(i, i) = 1.0f;
  e.linear.bias = Tensor({dim}, 0.0f);
}

Tensor project(const Tensor& x, const LinearParams& p) { return kernels::matmul(x, p.weight); }

}  // namespace

TEST_CASE("embed_qkv parameter identities") {
  auto p = small_block(8, 4, 1);
  const TokenSequence x{oracle::random_tensor({5, 8}, 2), 2, 2};
  SUBCASE("identity layer norm and linear give normalised tokens") {
    identity_embed(p.q, 8);
    const auto q = embed_qkv(x, p).q;
    for (int r = 0; r < 5; ++r) {
      double mean = 0.0, var = 0.0;
      for (int j = 0; j < 8; ++j) mean += x.tokens.at(r, j);
      mean /= 8;
      for (int j = 0; j < 8; ++j) var += (x.tokens.at(r, j) - mean) * (x.tokens.at(r, j) - mean);
      var /= 8;
      for (int j = 0; j < 8; ++j)
        CHECK(q.at(r, j) == doctest::Approx((x.tokens.at(r, j) - mean) / std::sqrt(var + 1e-5)).epsilon(1e-4));
    }
  }
  SUBCASE("zero weights give the bias in every row") {
    p.k.linear.weight = Tensor({8, 8}, 0.0f);
    p.k.linear.bias = oracle::random_tensor({8}, 3);
    const auto k = embed_qkv(x, p).k;
    for (int r = 0; r < 5; ++r)
      for (int j = 0; j < 8; ++j) CHECK(k.at(r, j) == p.k.linear.bias[j]);
  }
  SUBCASE("width mismatch") {
    const TokenSequence wrong{oracle::random_tensor({5, 6}, 4), 2, 2};
    CHECK_THROWS_AS(embed_qkv(wrong, p), ShapeError);
  }
}

TEST_CASE("standard attention") {
  const auto v = oracle::random_tensor({1, 6}, 5);
  CHECK(max_abs_diff(standard_attention(oracle::random_tensor({1, 6}, 6), oracle::random_tensor({1, 6}, 7), v), v) <
        1e-7);

  const auto q = oracle::random_tensor({4, 6}, 8);
  const auto v4 = oracle::random_tensor({4, 6}, 9);
  Tensor k({4, 6});
  for (int r = 0; r < 4; ++r)
    for (int j = 0; j < 6; ++j) k.at(r, j) = 0.3f * static_cast<float>(j);
  const auto out = standard_attention(q, k, v4);
  for (int j = 0; j < 6; ++j) {
    double mean = 0.0;
    for (int r = 0; r < 4; ++r) mean += v4.at(r, j) / 4.0;
    for (int r = 0; r < 4; ++r) CHECK(out.at(r, j) == doctest::Approx(mean).epsilon(1e-5));
  }

  const auto a = oracle::random_tensor({3, 6}, 10), b = oracle::random_tensor({3, 6}, 11);
  const auto c = oracle::random_tensor({3, 6}, 12);
  CHECK(max_abs_diff(standard_attention(a, b, c), oracle::attention(a, b, c)) < 1e-5);
}

TEST_CASE("modulated attention") {
  const auto v = oracle::random_tensor({1, 4}, 13);
  const auto single = modulated_attention(oracle::random_tensor({1, 4}, 14), oracle::random_tensor({1, 4}, 15), v);
  for (int j = 0; j < 4; ++j) CHECK(single[j] == doctest::Approx(3.0 * v[j]));

  const auto x = oracle::random_tensor({5, 4}, 16);
  const auto same = modulated_attention(x, x, x);
  const auto expected = oracle::attention(x, x, x);
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(same[i] == doctest::Approx(3.0 * expected[i]).epsilon(1e-5));

  const auto q = oracle::random_tensor({7, 4}, 17), k = oracle::random_tensor({7, 4}, 18);
  const auto v7 = oracle::random_tensor({7, 4}, 19);
  CHECK(max_abs_diff(modulated_attention(q, k, v7), oracle::modulated_attention(q, k, v7)) < 1e-5);
}

TEST_CASE("multi-head attention splits channels") {
  const auto q = oracle::random_tensor({5, 8}, 20), k = oracle::random_tensor({5, 8}, 21);
  const auto v = oracle::random_tensor({5, 8}, 22);
  const auto out = standard_attention(q, k, v, 2);
  for (int h = 0; h < 2; ++h) {
    Tensor qh({5, 4}), kh({5, 4}), vh({5, 4});
    for (int r = 0; r < 5; ++r)
      for (int j = 0; j < 4; ++j) {
        qh.at(r, j) = q.at(r, h * 4 + j);
        kh.at(r, j) = k.at(r, h * 4 + j);
        vh.at(r, j) = v.at(r, h * 4 + j);
      }
    const auto ref = oracle::attention(qh, kh, vh);
    for (int r = 0; r < 5; ++r)
      for (int j = 0; j < 4; ++j) CHECK(out.at(r, h * 4 + j) == doctest::Approx(ref.at(r, j)).epsilon(1e-5));
  }
  CHECK_THROWS(standard_attention(q, k, v, 3));
}

TEST_CASE("tap_early_features") {
  auto p = small_block(4, 2, 23);
  p.proj.weight = Tensor({4, 2}, 0.0f);
  p.proj.weight.at(0, 0) = p.proj.weight.at(1, 1) = 1.0f;
  const TokenSequence x{oracle::random_tensor({5, 4}, 24), 2, 2};
  const auto f = tap_early_features(x, p);
  CHECK(f.shape() == Shape{2, 2, 2});
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) CHECK(f[i * 2 + j] == x.tokens.at(i + 1, j));
}

TEST_CASE("baseline forward is Proj of modulated attention") {
  const auto p = small_block(8, 4, 25);
  const TokenSequence x{oracle::random_tensor({5, 8}, 26), 2, 2};
  const auto qkv = embed_qkv(x, p);
  const auto out = baseline_forward(x, p);
  CHECK(out.h == 2);
  CHECK(out.tokens.shape() == Shape{5, 4});
  CHECK(max_abs_diff(out.tokens, project(oracle::modulated_attention(qkv.q, qkv.k, qkv.v), p.proj)) < 1e-5);

  // a lone token: the row is Proj(3 v_0)
  const Tensor first({1, 8}, std::vector<float>(x.tokens.data().begin(), x.tokens.data().begin() + 8));
  const auto one = embed_qkv(TokenSequence{first, 0, 0}, p);
  const auto row = project(modulated_attention(one.q, one.k, one.v), p.proj);
  CHECK(max_abs_diff(row, project(kernels::scale(one.v, 3.0f), p.proj)) < 1e-5);
}

TEST_CASE("vanilla forward identities") {
  auto p = small_block(8, 4, 27);
  const TokenSequence x{oracle::random_tensor({5, 8}, 28), 2, 2};
  SUBCASE("zero feed-forward leaves the attention residual") {
    p.ffn_out.weight = Tensor(p.ffn_out.weight.shape(), 0.0f);
    p.ffn_out.bias = Tensor(p.ffn_out.bias.shape(), 0.0f);
    const auto qkv = embed_qkv(x, p);
    const auto y = kernels::add(x.tokens, standard_attention(qkv.q, qkv.k, qkv.v));
    CHECK(max_abs_diff(vanilla_forward(x, p).tokens, project(y, p.proj)) < 1e-6);
  }
  SUBCASE("zero value weights leave the input") {
    p.v.linear.weight = Tensor({8, 8}, 0.0f);
    p.v.linear.bias = Tensor({8}, 0.0f);
    p.ffn_out.weight = Tensor(p.ffn_out.weight.shape(), 0.0f);
    p.ffn_out.bias = Tensor(p.ffn_out.bias.shape(), 0.0f);
    CHECK(max_abs_diff(vanilla_forward(x, p).tokens, project(x.tokens, p.proj)) < 1e-6);
  }
  SUBCASE("baseline differs from vanilla") {
    CHECK(max_abs_diff(vanilla_forward(x, p).tokens, baseline_forward(x, p).tokens) > 1e-3);
  }
}
