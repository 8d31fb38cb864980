#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "ovseg/error.hpp"
#include "ovseg/eval/dataset.hpp"
#include "ovseg/eval/metrics.hpp"
#include "ovseg/features/image_io.hpp"

using namespace ovseg;
namespace fs = std::filesystem;

using Labels = std::vector<std::int32_t>;

TEST_CASE("confusion matrix") {
  SUBCASE("perfect prediction is diagonal") {
    const Labels l{0, 1, 2, 2, 1, 0, 0};
    ConfusionMatrix cm(3);
    cm.accumulate(l, l);
    CHECK(cm.at(0, 0) + cm.at(1, 1) + cm.at(2, 2) == 7);
    CHECK(cm.total() == 7);
  }
  SUBCASE("all wrong lands off the diagonal") {
    ConfusionMatrix cm(2);
    cm.accumulate(Labels(9, 1), Labels(9, 0));
    CHECK(cm.at(0, 1) == 9);
    CHECK(cm.at(0, 0) == 0);
  }
  SUBCASE("random 4x4 with three classes matches enumeration") {
    SplitMix64 rng(1);
    Labels pred(16), gt(16);
    for (auto& v : pred) v = static_cast<std::int32_t>(rng.below(3));
    for (auto& v : gt) v = static_cast<std::int32_t>(rng.below(3));
    ConfusionMatrix cm(3);
    cm.accumulate(pred, gt);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        std::uint64_t n = 0;
        for (int i = 0; i < 16; ++i) n += gt[i] == a && pred[i] == b;
        CHECK(cm.at(a, b) == n);
      }
  }
  SUBCASE("accumulation is additive") {
    ConfusionMatrix a(2), b(2), both(2);
    a.accumulate(Labels{0, 1}, Labels{1, 1});
    b.accumulate(Labels{1, 0, 0}, Labels{0, 0, 1});
    both.accumulate(Labels{0, 1, 1, 0, 0}, Labels{1, 1, 0, 0, 1});
    a.merge(b);
    CHECK(a == both);
  }
  SUBCASE("errors") {
    ConfusionMatrix cm(2);
    CHECK_THROWS_AS(cm.accumulate(Labels{0, 1}, Labels{0}), ShapeError);
    CHECK_THROWS_AS(cm.accumulate(Labels{0, 2}, Labels{0, 1}), DataError);
  }
}

TEST_CASE("mIoU report") {
  SUBCASE("perfect") {
    ConfusionMatrix cm(3);
    cm.accumulate(Labels{0, 1, 2}, Labels{0, 1, 2});
    const auto r = compute_miou(cm);
    CHECK(r.miou == 1.0);
    for (const auto& c : r.per_class) CHECK(*c.iou == 1.0);
  }
  SUBCASE("disjoint") {
    ConfusionMatrix cm(2);
    cm.accumulate(Labels{1, 1}, Labels{0, 0});
    CHECK(compute_miou(cm).miou == 0.0);
  }
  SUBCASE("worked 2x2 case") {
    ConfusionMatrix cm(2);
    cm.accumulate(Labels{0, 1, 1, 1}, Labels{0, 0, 1, 1});
    const auto r = compute_miou(cm, {"bg", "fg"});
    CHECK(r.miou == doctest::Approx(7.0 / 12.0));
    CHECK(*compute_fg_iou(cm, 1) == doctest::Approx(2.0 / 3.0));
    const auto j = r.to_json();
    CHECK(j.at("per_class").at(1).at("name") == "fg");
    CHECK(j.at("fg_iou").get<double>() == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("absent class is excluded") {
    ConfusionMatrix cm(3);
    cm.accumulate(Labels{0, 1}, Labels{0, 1});
    const auto r = compute_miou(cm);
    CHECK(!r.per_class[2].iou);
    CHECK(r.miou == 1.0);
    CHECK(r.to_json().at("per_class").at(2).at("iou").is_null());
  }
  SUBCASE("foreground IoU edge cases") {
    ConfusionMatrix perfect(2), missed(2), none(2);
    perfect.accumulate(Labels{0, 1}, Labels{0, 1});
    missed.accumulate(Labels{0, 0}, Labels{0, 1});
    none.accumulate(Labels{0, 0}, Labels{0, 0});
    CHECK(*compute_fg_iou(perfect, 1) == 1.0);
    CHECK(*compute_fg_iou(missed, 1) == 0.0);
    CHECK(!compute_fg_iou(none, 1));
  }
  SUBCASE("empty matrix") { CHECK_THROWS_AS(compute_miou(ConfusionMatrix(2)), DataError); }
}

TEST_CASE("dataset evaluation") {
  const auto dir = fs::temp_directory_path() / "ovseg_unit_dataset";
  fs::remove_all(dir);
  fs::create_directories(dir / "gt");
  write_ppm(dir / "gt/a.ppm", Tensor({2, 3, 3}, 0.0f));
  write_pgm(dir / "gt/a.pgm", GrayImage{2, 3, {0, 1, 1, 2, 2, 0}});
  std::ofstream(dir / "m.json") << R"({"classes": ["x", {"name": "y", "subclasses": ["y1", "y2"]}, "z"],
                                        "entries": [{"image": "gt/a.ppm", "mask": "gt/a.pgm"}]})";
  const auto m = load_manifest(dir / "m.json");
  CHECK(m.class_names() == std::vector<std::string>{"x", "y", "z"});
  CHECK(m.classes[1].subclasses.size() == 2);
  CHECK(evaluate_predictions(m, dir / "gt").miou == 1.0);

  fs::create_directories(dir / "pred");
  write_pgm(dir / "pred/a.pgm", GrayImage{2, 3, {0, 0, 1, 2, 2, 0}});
  const auto r = evaluate_predictions(m, dir / "pred");
  CHECK(r.per_class[0].intersection == 2);
  CHECK(r.per_class[0].union_ == 3);

  write_pgm(dir / "pred/a.pgm", GrayImage{1, 3, {0, 0, 1}});
  CHECK_THROWS_AS(evaluate_predictions(m, dir / "pred"), DataError);
  CHECK_THROWS_AS(evaluate_predictions(m, dir / "nothing"), DataError);
  write_pgm(dir / "gt/a.pgm", GrayImage{2, 3, {0, 1, 1, 2, 2, 7}});
  CHECK_THROWS_AS(evaluate_predictions(m, dir / "gt"), DataError);
  CHECK_THROWS_AS(load_manifest(dir / "absent.json"), DataError);
  fs::remove_all(dir);
}
