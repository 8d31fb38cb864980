#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "ovseg/error.hpp"
#include "ovseg/numeric/ad_ops.hpp"
#include "ovseg/numeric/gradcheck.hpp"
#include "ovseg/numeric/kernels.hpp"
#include "ovseg/numeric/reference.hpp"
#include "ovseg/numeric/tensor_io.hpp"

using namespace ovseg;
namespace fs = std::filesystem;

TEST_CASE("softmax of a single element is one") {
  const Tensor x({1, 1}, -3.7f);
  CHECK(kernels::softmax_rows(x)[0] == 1.0f);
}

TEST_CASE("matmul with identity returns the input") {
  const auto a = oracle::random_tensor({5, 7}, 1);
  Tensor eye({7, 7}, 0.0f);
  for (int i = 0; i < 7; ++i) eye.at(i, i) = 1.0f;
  CHECK(kernels::matmul(a, eye) == a);
}

TEST_CASE("parallel matmul and softmax match the serial versions and the oracle") {
  for (int n = 0; n < 10; ++n) {
    SplitMix64 rng(derive_seed(2, n));
    const auto m = 1 + rng.below(40), k = 1 + rng.below(40), p = 1 + rng.below(40);
    const auto a = oracle::random_tensor({int64_t(m), int64_t(k)}, rng.next());
    const auto b = oracle::random_tensor({int64_t(k), int64_t(p)}, rng.next());
    CHECK(max_abs_diff(kernels::matmul(a, b), reference::matmul(a, b)) < 1e-5);
    CHECK(max_abs_diff(kernels::matmul(a, b), oracle::matmul(a, b)) < 1e-5);
    CHECK(max_abs_diff(kernels::softmax_rows(a), oracle::softmax_rows(a)) < 1e-6);
    CHECK(max_abs_diff(reference::softmax_rows(a), oracle::softmax_rows(a)) < 1e-6);
  }
}

TEST_CASE("conv2d of a constant map with a normalised kernel keeps the constant") {
  const Tensor x({6, 5, 3}, 0.25f);
  auto w = oracle::random_tensor({3, 3, 3, 2}, 3, 0.0, 1.0);
  for (int o = 0; o < 2; ++o) {
    double s = 0.0;
    for (int i = 0; i < 27; ++i) s += w[i * 2 + o];
    for (int i = 0; i < 27; ++i) w[i * 2 + o] = static_cast<float>(w[i * 2 + o] / s);
  }
  const auto y = kernels::conv2d(x, w, Tensor{}, 1, 1);
  CHECK(y.shape() == Shape{6, 5, 2});
  for (auto v : y.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("conv2d matches the loop oracle and the serial reference") {
  for (int n = 0; n < 6; ++n) {
    SplitMix64 rng(derive_seed(4, n));
    const auto x = oracle::random_tensor({int64_t(3 + rng.below(8)), int64_t(3 + rng.below(8)), 3}, rng.next());
    const auto w = oracle::random_tensor({3, 3, 3, 4}, rng.next());
    const auto b = oracle::random_tensor({4}, rng.next());
    CHECK(max_abs_diff(kernels::conv2d(x, w, b, 1, 1), oracle::conv2d_replicate(x, w, b, 1)) < 1e-5);
    CHECK(max_abs_diff(reference::conv2d(x, w, b, 1, 1), oracle::conv2d_replicate(x, w, b, 1)) < 1e-5);
  }
}

TEST_CASE("kernels reject shape mismatches and name the operator") {
  const Tensor a({2, 3}), b({4, 2});
  try {
    kernels::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("matmul") != std::string::npos);
  }
  CHECK_THROWS_AS(kernels::add(a, b), ShapeError);
}

TEST_CASE("backward of sum(w*x) gives x") {
  Graph<double> g;
  const auto x = oracle::random_tensor({3, 4}, 5).cast<double>();
  auto w = g.parameter("w", oracle::random_tensor({3, 4}, 6).cast<double>());
  const auto r = backward(g, ad::sum(ad::mul(w, g.constant(x))));
  CHECK(r.grads.at("w") == x);
}

TEST_CASE("backward of ||w||^2 gives 2w") {
  Graph<double> g;
  const auto wv = oracle::random_tensor({5}, 7).cast<double>();
  auto w = g.parameter("w", wv);
  const auto r = backward(g, ad::sum(ad::mul(w, w)));
  for (std::size_t i = 0; i < wv.size(); ++i) CHECK(r.grads.at("w")[i] == doctest::Approx(2 * wv[i]));
}

TEST_CASE("backward rejects non-scalar outputs and flags unreachable leaves") {
  Graph<double> g;
  auto w = g.parameter("w", BasicTensor<double>({2}, 1.0));
  auto unused = g.parameter("unused", BasicTensor<double>({3}, 1.0));
  (void)unused;
  CHECK_THROWS_AS(backward(g, ad::scale(w, 2.0)), ShapeError);
  const auto r = backward(g, ad::sum(w));
  REQUIRE(r.unreachable.size() == 1);
  CHECK(r.unreachable[0] == "unused");
  CHECK(r.grads.at("unused") == BasicTensor<double>({3}, 0.0));
}

TEST_CASE("finite-difference check") {
  ParamSet<double> params{{"w", oracle::random_tensor({4, 3}, 8).cast<double>()}};
  const auto x = oracle::random_tensor({2, 4}, 9).cast<double>();

  SUBCASE("linear graph is exact") {
    LossBuilder<double> build = [&](Graph<double>& g, const VarMap<double>& v) {
      return ad::sum(ad::matmul(g.constant(x), lookup(v, "w")));
    };
    CHECK(finite_difference_check(build, params, 1e-3).max_rel_error < 1e-6);
  }
  SUBCASE("softmax-matmul graph") {
    const auto t = oracle::random_tensor({2, 3}, 10).cast<double>();
    LossBuilder<double> build = [&](Graph<double>& g, const VarMap<double>& v) {
      return ad::mse(ad::softmax_rows(ad::matmul(g.constant(x), lookup(v, "w"))), g.constant(t));
    };
    CHECK(finite_difference_check(build, params, 1e-3).max_rel_error < 1e-3);
  }
  SUBCASE("conv, resize, layer norm and windows") {
    ParamSet<double> p{{"k", oracle::random_tensor({3, 3, 2, 2}, 11).cast<double>()},
                       {"gamma", oracle::random_tensor({2}, 12).cast<double>()},
                       {"beta", oracle::random_tensor({2}, 13).cast<double>()}};
    const auto img = oracle::random_tensor({3, 4, 2}, 14).cast<double>();
    LossBuilder<double> build = [&](Graph<double>& g, const VarMap<double>& v) {
      auto y = ad::conv2d(g.constant(img), lookup(v, "k"), Var<double>{}, 1, 1);
      y = ad::resize_bilinear(ad::gelu(y), 6, 8);
      auto rows = ad::layer_norm(ad::reshape(y, {48, 2}), lookup(v, "gamma"), lookup(v, "beta"));
      auto win = ad::extract_windows(ad::reshape(ad::tanh(rows), {6, 8, 2}), 1);
      return ad::mean(ad::mul(win, win));
    };
    CHECK(finite_difference_check(build, p, 1e-5).max_rel_error < 1e-3);
  }
  SUBCASE("step zero is rejected") {
    LossBuilder<double> build = [&](Graph<double>&, const VarMap<double>& v) { return ad::sum(lookup(v, "w")); };
    CHECK_THROWS_AS(finite_difference_check(build, params, 0.0), ArgumentError);
  }
}

TEST_CASE("tensor binary format") {
  const auto dir = fs::temp_directory_path() / "ovseg_unit_tensor";
  fs::create_directories(dir);
  const auto t = oracle::random_tensor({2, 3, 4}, 15);
  save_tensor(dir / "t.sfup", t);
  CHECK(load_tensor(dir / "t.sfup") == t);

  auto bytes = encode_tensor(t);
  CHECK(bytes.size() == 4 + 4 + 4 + 3 * 4 + 24 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SFUP");

  SUBCASE("truncated payload") {
    bytes.pop_back();
    CHECK_THROWS_AS(decode_tensor(bytes), DataError);
  }
  SUBCASE("bad version") {
    bytes[4] = 9;
    CHECK_THROWS_AS(decode_tensor(bytes), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_tensor(dir / "absent.sfup"), DataError); }
  fs::remove_all(dir);
}
