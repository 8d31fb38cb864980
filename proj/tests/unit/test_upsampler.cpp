#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "ovseg/error.hpp"
#include "ovseg/numeric/gradcheck.hpp"
#include "ovseg/numeric/ad_ops.hpp"
#include "ovseg/upsampler/checkpoint.hpp"
#include "ovseg/upsampler/jbu.hpp"
#include "ovseg/upsampler/simfeatup.hpp"

using namespace ovseg;
namespace fs = std::filesystem;

namespace {
double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }
}  // namespace

TEST_CASE("spatial kernel") {
  const auto k = spatial_kernel(3, 1.3f);
  CHECK(k.shape() == Shape{7, 7});
  CHECK(k.at(3, 3) == 1.0f);
  CHECK(k.at(3, 4) == doctest::Approx(std::exp(-1.0 / (2 * 1.3 * 1.3))));
  for (int p = 0; p < 7; ++p)
    for (int q = 0; q < 7; ++q) {
      CHECK(k.at(p, q) == k.at(q, p));
      CHECK(k.at(p, q) == k.at(6 - p, q));
    }
  const auto wide = spatial_kernel(5, 1e6f);
  for (auto v : wide.data()) CHECK(std::abs(v - 1.0f) < 1e-6f);
  CHECK_THROWS_AS(spatial_kernel(0, 1.0f), ArgumentError);
  CHECK_THROWS_AS(spatial_kernel(2, 0.0f), ArgumentError);
}

TEST_CASE("range kernel") {
  const auto window = oracle::random_tensor({9, 5}, 1);
  const auto centre = oracle::random_tensor({5}, 2);
  const auto w = range_kernel(window, centre.data(), 0.8f);
  const auto expected = oracle::range_weights(window, centre.vec(), 0.8);
  for (int i = 0; i < 9; ++i) CHECK(w[i] == doctest::Approx(expected[i]).epsilon(1e-6));

  const Tensor flat({121, 4}, -0.2f);
  const auto uniform = range_kernel(flat, std::vector<float>(4, -0.2f), 0.5f);
  for (auto v : uniform.data())
    CHECK(v == doctest::Approx(1.0 / 121.0).epsilon(1e-6));
}

TEST_CASE("jbu_apply worked cases") {
  const auto p = JbuParams::init(3, 16, 5);
  SUBCASE("constant input") {
    const auto out = jbu_apply(Tensor({3, 5, 2}, -0.7f), oracle::random_tensor({6, 10, 3}, 4), p);
    for (auto v : out.data()) CHECK(v == doctest::Approx(-0.7).epsilon(1e-6));
  }
  SUBCASE("1x1 input gives a 2x2 copy") {
    const auto lr = oracle::random_tensor({1, 1, 3}, 5);
    const auto out = jbu_apply(lr, oracle::random_tensor({2, 2, 3}, 6), p);
    CHECK(out.shape() == Shape{2, 2, 3});
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 3; ++k) CHECK(out[i * 3 + k] == doctest::Approx(lr[k]).epsilon(1e-6));
  }
  SUBCASE("flat guidance and huge spatial tau give a window average") {
    auto q = p;
    q.log_tau_spatial[0] = static_cast<float>(std::log(1e6));
    Tensor lr({2, 2, 1});
    lr[0] = 1.0f, lr[1] = 2.0f, lr[2] = 3.0f, lr[3] = 4.0f;
    const auto out = jbu_apply(lr, Tensor({4, 4, 3}, 0.1f), q);
    CHECK(max_abs_diff(out, oracle::jbu(lr, Tensor({4, 4, 3}, 0.1f), q)) < 1e-5);
  }
  SUBCASE("guidance must be twice the input") {
    CHECK_THROWS_AS(jbu_apply(Tensor({2, 2, 1}, 0.0f), Tensor({5, 4, 3}, 0.0f), p), ShapeError);
  }
}

TEST_CASE("parallel JBU matches the serial reference and the oracle") {
  for (int n = 0; n < 8; ++n) {
    SplitMix64 rng(derive_seed(7, n));
    auto p = JbuParams::init(rng.next(), 8, 1 + static_cast<int>(rng.below(5)));
    p.log_tau_range[0] = static_cast<float>(rng.uniform(-0.5, 0.5));
    const int h = 1 + static_cast<int>(rng.below(6)), w = 1 + static_cast<int>(rng.below(6));
    const auto lr = oracle::random_tensor({h, w, 3}, rng.next());
    const auto g = oracle::random_tensor({2 * h, 2 * w, 3}, rng.next());
    const auto fast = jbu_apply(lr, g, p);
    CHECK(max_abs_diff(fast, reference::jbu_apply(lr, g, p)) < 1e-5);
    CHECK(max_abs_diff(fast, oracle::jbu(lr, g, p)) < 1e-5);
  }
}

TEST_CASE("simfeatup_upsample") {
  const auto p = JbuParams::init(8, 16, 5);
  SUBCASE("factor 16 on a 14x14 grid") {
    const auto out = simfeatup_upsample(oracle::random_tensor({14, 14, 2}, 9), oracle::random_tensor({224, 224, 3}, 10), p, 16);
    CHECK(out.shape() == Shape{224, 224, 2});
  }
  SUBCASE("factor 1 is the identity") {
    const auto lr = oracle::random_tensor({3, 3, 2}, 11);
    CHECK(simfeatup_upsample(lr, oracle::random_tensor({3, 3, 3}, 12), p, 1) == lr);
  }
  SUBCASE("factor must be a power of two") {
    CHECK_THROWS_AS(simfeatup_upsample(Tensor({2, 2, 1}, 0.0f), Tensor({6, 6, 3}, 0.0f), p, 3), ArgumentError);
    CHECK(upsample_stages(16) == 4);
    CHECK(jbu_stack_parameter_count(p, 16) == 4 * p.parameter_count());
  }
  SUBCASE("image must match the factor") {
    CHECK_THROWS_AS(simfeatup_upsample(Tensor({2, 2, 1}, 0.0f), Tensor({6, 8, 3}, 0.0f), p, 4), ShapeError);
  }
}

TEST_CASE("content retention network") {
  auto crn = CrnParams::init(13, 4, 6);
  SUBCASE("outputs stay in [-1, 1]") {
    const auto out = crn_reconstruct(oracle::random_tensor({5, 6, 4}, 14, -20.0, 20.0), crn);
    for (auto v : out.data())
      CHECK((v >= -1.0f && v <= 1.0f));
  }
  SUBCASE("zero weights give tanh of the bias") {
    crn.w1 = Tensor(crn.w1.shape(), 0.0f);
    crn.w2 = Tensor(crn.w2.shape(), 0.0f);
    crn.b2 = Tensor({3}, std::vector<float>{-0.5f, 0.0f, 2.0f});
    const auto out = crn_reconstruct(oracle::random_tensor({3, 3, 4}, 15), crn);
    for (int i = 0; i < 9; ++i)
      for (int k = 0; k < 3; ++k) CHECK(out[i * 3 + k] == doctest::Approx(std::tanh(crn.b2[k])));
  }
  SUBCASE("matches the convolution loop oracle") {
    crn.b1 = oracle::random_tensor({6}, 16);
    const auto hr = oracle::random_tensor({5, 4, 4}, 17);
    auto hidden = oracle::conv2d_replicate(hr, crn.w1, crn.b1, 1);
    for (auto& v : hidden.data()) v = static_cast<float>(gelu(v));
    auto expected = oracle::conv2d_replicate(hidden, crn.w2, crn.b2, 1);
    for (auto& v : expected.data()) v = std::tanh(v);
    CHECK(max_abs_diff(crn_reconstruct(hr, crn), expected) < 1e-5);
  }
  SUBCASE("channel mismatch") { CHECK_THROWS_AS(crn_reconstruct(Tensor({3, 3, 5}, 0.0f), crn), ShapeError); }
}

TEST_CASE("learned downsampler") {
  SUBCASE("constant input") {
    auto d = DownsamplerParams::init(4, 6);
    d.logits = oracle::random_tensor({6, 6}, 18);
    const auto out = downsample(Tensor({8, 12, 3}, 0.6f), d);
    for (auto v : out.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-6));
  }
  SUBCASE("uniform 2x2 kernel is average pooling") {
    const auto x = oracle::random_tensor({6, 4, 3}, 19);
    CHECK(max_abs_diff(downsample(x, DownsamplerParams::init(2)), oracle::average_pool(x, 2)) < 1e-6);
  }
  SUBCASE("224 to 14 at factor 16") {
    CHECK(downsample(Tensor({224, 224, 2}, 0.0f), DownsamplerParams::init(16)).shape() == Shape{14, 14, 2});
  }
  SUBCASE("non-divisible input") {
    CHECK_THROWS_AS(downsample(Tensor({10, 8, 1}, 0.0f), DownsamplerParams::init(4)), ShapeError);
  }
  SUBCASE("kernel is a softmax") {
    auto d = DownsamplerParams::init(2, 4);
    d.logits = oracle::random_tensor({4, 4}, 20);
    double s = 0.0;
    const auto k = d.kernel();
    for (auto v : k.data()) s += v;
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("jbu then downsample then mse passes the gradient check") {
  auto sp = SimFeatUpParams::init(21, 3, 4, 4, 2, 4);
  sp.down.logits = oracle::random_tensor(sp.down.logits.shape(), 22);
  auto params = cast_params<double>(sp.to_params());
  for (auto it = params.begin(); it != params.end();) it = it->first.rfind("crn.", 0) == 0 ? params.erase(it) : std::next(it);
  const auto lr = oracle::random_tensor({2, 3, 3}, 23).cast<double>();
  const auto image = oracle::random_tensor({8, 12, 3}, 24).cast<double>();
  LossBuilder<double> build = [&](Graph<double>& g, const VarMap<double>& v) {
    auto f = g.constant(lr);
    auto hr = simfeatup_upsample(f, g.constant(image), JbuVars<double>::from(v, 2), 4);
    return ad::mse(downsample(hr, lookup(v, "down.logits"), 4), f);
  };
  CHECK(finite_difference_check(build, params, 1e-5).max_rel_error < 1e-3);
}

TEST_CASE("checkpoint directory") {
  const auto dir = fs::temp_directory_path() / "ovseg_unit_ckpt";
  fs::remove_all(dir);
  Checkpoint ckpt{SimFeatUpParams::init(25, 16, 8), EncoderConfig{}, {{"steps", 3}}};
  save_checkpoint(dir, ckpt);
  CHECK(fs::is_regular_file(dir / "index.json"));
  const auto back = load_checkpoint(dir);
  CHECK(back.params.to_params() == ckpt.params.to_params());
  CHECK(back.training.at("steps") == 3);
  CHECK(back.encoder.seed == ckpt.encoder.seed);

  const auto lr = oracle::random_tensor({2, 2, 16}, 26);
  const auto g = oracle::random_tensor({16, 16, 3}, 27);
  CHECK(simfeatup_upsample(lr, g, back.params.jbu, 8) == simfeatup_upsample(lr, g, ckpt.params.jbu, 8));

  fs::remove(dir / "jbu.log_tau_range.sfup");
  CHECK_THROWS_AS(load_checkpoint(dir), DataError);
  try {
    load_checkpoint(dir / "missing");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
  fs::remove_all(dir);
}
