#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "ovseg/error.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/features/synthetic.hpp"
#include "ovseg/training/adam.hpp"
#include "ovseg/training/augment.hpp"
#include "ovseg/training/losses.hpp"
#include "ovseg/training/trainer.hpp"
#include "ovseg/upsampler/checkpoint.hpp"

using namespace ovseg;
namespace fs = std::filesystem;

TEST_CASE("reconstruction loss of a constant map is zero") {
  const auto sp = SimFeatUpParams::init(1, 3, 4, 8, 3);
  auto down = sp.down;
  down.logits = oracle::random_tensor(down.logits.shape(), 2);
  CHECK(loss_rec(Tensor({3, 2, 3}, 0.45f), oracle::random_tensor({12, 8, 3}, 3), sp.jbu, down) < 1e-12);
  CHECK(loss_rec(oracle::random_tensor({3, 2, 3}, 4), oracle::random_tensor({12, 8, 3}, 5), sp.jbu, down) > 0.0);
  CHECK_THROWS_AS(loss_rec(Tensor({3, 2, 3}, 0.0f), Tensor({12, 12, 3}, 0.0f), sp.jbu, down), ShapeError);
}

TEST_CASE("image loss") {
  auto crn = CrnParams::init(6, 3, 4);
  const auto hr = oracle::random_tensor({5, 5, 3}, 7);
  CHECK(loss_img(hr, crn, crn_reconstruct(hr, crn)) == 0.0);

  crn.w1 = Tensor(crn.w1.shape(), 0.0f);
  crn.w2 = Tensor(crn.w2.shape(), 0.0f);
  crn.b2 = Tensor({3}, 0.0f);
  CHECK(loss_img(hr, crn, Tensor({5, 5, 3}, 0.0f)) == 0.0);
  CHECK_THROWS_AS(loss_img(hr, crn, Tensor({5, 4, 3}, 0.0f)), ShapeError);
}

TEST_CASE("total loss combines the two terms") {
  auto sp = SimFeatUpParams::init(8, 3, 2, 4, 2, 4);
  const auto lr = oracle::random_tensor({3, 3, 3}, 9);
  const auto image = oracle::random_tensor({6, 6, 3}, 10);
  const auto zero = evaluate_loss(lr, image, sp, 0.0);
  CHECK(zero.total == doctest::Approx(loss_rec(lr, image, sp.jbu, sp.down)).epsilon(1e-6));
  const auto v = evaluate_loss(lr, image, sp, 0.1);
  CHECK(v.total == doctest::Approx(v.rec + 0.1 * v.img).epsilon(1e-6));
  CHECK(v.img == doctest::Approx(loss_img(simfeatup_upsample(lr, image, sp.jbu, 2), sp.crn, image)).epsilon(1e-6));
}

TEST_CASE("augmented views") {
  const auto image = synthetic_scene(32, 32, 11).image;
  const FeatureFn fn = early_feature_fn(EncoderConfig{});
  AugmentFlags none{false, false, false};
  const auto one = augment_views(image, fn, none, 12, 4);
  REQUIRE(one.size() == 1);
  CHECK(one[0].image == image);
  CHECK(one[0].features.shape() == Shape{4, 4, 16});

  AugmentFlags flip{true, false, false};
  const auto two = augment_views(image, fn, flip, 12, 4);
  REQUIRE(two.size() == 2);
  CHECK(two[1].features.shape() == one[0].features.shape());
  CHECK(flip_horizontal(flip_horizontal(image)) == image);

  AugmentParams a;
  CHECK(apply_augment(image, a) == image);
  a.shift_x = 3;
  const auto shifted = apply_augment(image, a);
  for (int k = 0; k < 3; ++k) CHECK(shifted.at(5, 10, k) == image.at(5, 7, k));
}

TEST_CASE("adam moves against the gradient") {
  ParamSet<float> p{{"w", Tensor({3}, std::vector<float>{1.0f, -1.0f, 0.0f})}};
  Adam opt(AdamConfig{});
  opt.step(p, {{"w", Tensor({3}, std::vector<float>{2.0f, -0.5f, 0.0f})}});
  // the first bias-corrected step has magnitude lr for every non-zero gradient
  CHECK(p.at("w")[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(p.at("w")[1] == doctest::Approx(-1.0 + 1e-3).epsilon(1e-6));
  CHECK(p.at("w")[2] == 0.0f);
}

TEST_CASE("training loop") {
  std::vector<Tensor> corpus;
  for (int n = 0; n < 3; ++n) corpus.push_back(synthetic_scene(72, 80, derive_seed(13, n)).image);
  TrainConfig cfg;
  cfg.crop = 32;
  cfg.seed = 14;

  SUBCASE("zero steps keep the initialisation") {
    cfg.steps = 0;
    const auto r = train_upsampler(corpus, cfg, EncoderConfig{});
    CHECK(r.series.empty());
    CHECK(r.params.to_params() ==
          SimFeatUpParams::init(derive_seed(cfg.seed, 1), 16, 8, cfg.guide_width, cfg.radius, cfg.crn_hidden).to_params());
  }
  SUBCASE("same seed, same series") {
    cfg.steps = 4;
    const auto a = train_upsampler(corpus, cfg, EncoderConfig{});
    const auto b = train_upsampler(corpus, cfg, EncoderConfig{});
    REQUIRE(a.series.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(a.series[i].total == b.series[i].total);
    CHECK(a.params.to_params() == b.params.to_params());
  }
  SUBCASE("bad inputs fail before training") {
    CHECK_THROWS_AS(train_upsampler(std::vector<Tensor>{}, cfg, EncoderConfig{}), DataError);
    CHECK_THROWS_AS(train_upsampler({Tensor({16, 16, 3}, 0.0f)}, cfg, EncoderConfig{}), DataError);
    cfg.factor = 4;
    CHECK_THROWS_AS(train_upsampler(corpus, cfg, EncoderConfig{}), ArgumentError);
  }
  SUBCASE("directory form writes a loadable checkpoint") {
    const auto dir = fs::temp_directory_path() / "ovseg_unit_train";
    fs::remove_all(dir);
    write_synthetic_corpus(dir / "corpus", 2, 40, 40, 15);
    cfg.steps = 2;
    const auto r = train_upsampler(dir / "corpus", cfg, EncoderConfig{}, dir / "ckpt");
    const auto back = load_checkpoint(dir / "ckpt");
    CHECK(back.params.to_params() == r.params.to_params());
    CHECK(back.training.at("steps") == 2);
    CHECK_THROWS_AS(train_upsampler(dir / "nowhere", cfg, EncoderConfig{}, dir / "x"), DataError);
    fs::remove_all(dir);
  }
}
