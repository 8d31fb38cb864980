#include "ovseg/eval/dataset.hpp"

#include <fstream>

#include "ovseg/features/image_io.hpp"

namespace ovseg {
namespace fs = std::filesystem;

std::vector<std::string> DatasetManifest::class_names() const {
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.name);
  return names;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid JSON: " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  try {
    for (const auto& c : j.at("classes")) {
      ClassSpec spec;
      if (c.is_string()) {
        spec.name = c.get<std::string>();
      } else {
        spec.name = c.at("name").get<std::string>();
        if (c.contains("subclasses")) spec.subclasses = c.at("subclasses").get<std::vector<std::string>>();
      }
      if (spec.subclasses.empty()) spec.subclasses = {spec.name};
      m.classes.push_back(std::move(spec));
    }
    for (const auto& e : j.at("entries")) {
      DatasetEntry entry{m.root / e.at("image").get<std::string>(), m.root / e.at("mask").get<std::string>()};
      for (const auto& f : {entry.image, entry.mask})
        if (!fs::is_regular_file(f)) throw DataError(path.string() + ": referenced file not found: " + f.string());
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (m.classes.empty()) throw DataError(path.string() + ": no classes");
  return m;
}

SegmentationMask read_mask(const fs::path& path, int classes) {
  const GrayImage img = read_pgm(path);
  SegmentationMask m{img.height, img.width, {}, {}};
  m.labels.reserve(img.pixels.size());
  for (auto v : img.pixels) {
    if (v >= classes)
      throw DataError(path.string() + ": label " + std::to_string(v) + " is not below the class count " +
                      std::to_string(classes));
    m.labels.push_back(v);
  }
  return m;
}

MetricsReport evaluate_predictions(const DatasetManifest& manifest, const fs::path& pred_dir) {
  const int k = static_cast<int>(manifest.classes.size());
  if (manifest.entries.empty()) throw DataError("manifest has no entries");
  ConfusionMatrix cm(k);
  for (const auto& e : manifest.entries) {
    const fs::path pred_path = pred_dir / e.mask.filename();
    if (!fs::is_regular_file(pred_path)) throw DataError("prediction not found: " + pred_path.string());
    const auto gt = read_mask(e.mask, k);
    const auto pred = read_mask(pred_path, k);
    if (gt.height != pred.height || gt.width != pred.width)
      throw DataError(pred_path.string() + ": size differs from ground truth " + e.mask.string());
    cm.accumulate(pred, gt);
  }
  return compute_miou(cm, manifest.class_names());
}

}  // namespace ovseg
