#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ovseg/eval/metrics.hpp"
#include "ovseg/features/text_bank.hpp"

namespace ovseg {

struct DatasetEntry {
  std::filesystem::path image;  // resolved against the manifest directory
  std::filesystem::path mask;
};

/// {"classes": [...], "entries": [{"image": ..., "mask": ...}]}. A class is
/// a name or {"name": ..., "subclasses": [...]}.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ClassSpec> classes;
  std::vector<DatasetEntry> entries;

  std::vector<std::string> class_names() const;
};

/// Throws DataError when the JSON is malformed or a referenced file is missing.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// PGM mask; every value must be below `classes`.
SegmentationMask read_mask(const std::filesystem::path& path, int classes);

/// Predictions are looked up in pred_dir under each ground-truth mask's file
/// name.
MetricsReport evaluate_predictions(const DatasetManifest& manifest, const std::filesystem::path& pred_dir);

}  // namespace ovseg
