#include "ovseg/features/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/numeric/rng.hpp"

namespace ovseg {
namespace {

constexpr std::array<std::array<float, 3>, 8> kPalette{{
    {-0.2f, 0.1f, -0.4f},   // background: vegetation-ish
    {0.7f, 0.6f, 0.5f},     // building
    {-0.6f, -0.3f, 0.5f},   // water
    {0.1f, 0.1f, 0.1f},     // road
    {0.8f, -0.2f, -0.4f},   // bare soil
    {-0.7f, 0.6f, -0.6f},   // forest
    {0.5f, 0.5f, -0.7f},    // farmland
    {-0.1f, -0.6f, 0.7f},   // other
}};

constexpr std::array<const char*, 8> kNames{"background", "building", "water",    "road",
                                           "bare_soil",  "forest",   "farmland", "other"};

}  // namespace

std::vector<std::string> synthetic_class_names(int classes) {
  if (classes < 1 || classes > static_cast<int>(kNames.size()))
    throw ArgumentError("synthetic scenes support 1 to 8 classes");
  return {kNames.begin(), kNames.begin() + classes};
}

SyntheticScene synthetic_scene(int height, int width, std::uint64_t seed, int classes) {
  if (height <= 0 || width <= 0) throw ArgumentError("synthetic_scene: size must be positive");
  synthetic_class_names(classes);
  SplitMix64 rng(seed);
  SyntheticScene s;
  s.height = height;
  s.width = width;
  s.labels.assign(static_cast<std::size_t>(height) * width, 0);

  const int shapes = classes > 1 ? 3 + static_cast<int>(rng.below(4)) : 0;
  for (int n = 0; n < shapes; ++n) {
    const auto cls = static_cast<std::uint8_t>(1 + rng.below(static_cast<std::uint64_t>(classes - 1)));
    const double cy = rng.uniform(0, height), cx = rng.uniform(0, width);
    const double ry = rng.uniform(0.08, 0.3) * height, rx = rng.uniform(0.08, 0.3) * width;
    const bool disk = rng.below(2) == 0;
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        const double dy = (i + 0.5 - cy) / ry, dx = (j + 0.5 - cx) / rx;
        const bool inside = disk ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside) s.labels[static_cast<std::size_t>(i) * width + j] = cls;
      }
  }

  // Per-scene tint and a gentle illumination gradient.
  std::array<double, 3> tint{};
  for (auto& t : tint) t = rng.uniform(-0.1, 0.1);
  const double gy = rng.uniform(-0.15, 0.15), gx = rng.uniform(-0.15, 0.15);
  s.image = Tensor({height, width, 3});
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const auto cls = s.labels[static_cast<std::size_t>(i) * width + j];
      const double shade = gy * (2.0 * i / height - 1.0) + gx * (2.0 * j / width - 1.0);
      for (int k = 0; k < 3; ++k) {
        const double v = kPalette[cls][k] + tint[k] + shade + rng.uniform(-0.03, 0.03);
        s.image.at(i, j, k) = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
    }
  return s;
}

void write_synthetic_corpus(const std::filesystem::path& dir, int count, int height, int width, std::uint64_t seed,
                            int classes, bool with_masks) {
  if (count <= 0) throw ArgumentError("synthetic corpus needs at least one image");
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (int n = 0; n < count; ++n) {
    char img_name[32], mask_name[32];
    std::snprintf(img_name, sizeof img_name, "img_%03d.ppm", n);
    std::snprintf(mask_name, sizeof mask_name, "mask_%03d.pgm", n);
    const auto scene = synthetic_scene(height, width, derive_seed(seed, static_cast<std::uint64_t>(n)), classes);
    write_ppm(dir / img_name, scene.image);
    if (with_masks) {
      write_pgm(dir / mask_name, GrayImage{height, width, scene.labels});
      entries.push_back({{"image", img_name}, {"mask", mask_name}});
    }
  }
  if (with_masks) {
    nlohmann::json manifest{{"classes", synthetic_class_names(classes)}, {"entries", entries}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << "\n";
  }
}

}  // namespace ovseg
