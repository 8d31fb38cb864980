#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ovseg/pipeline/ovss.hpp"

namespace ovseg {

/// K x K pixel counts; cell (g, p) counts pixels with ground truth g
/// predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  int classes() const { return k_; }
  std::uint64_t at(int gt, int pred) const { return cells_[static_cast<std::size_t>(gt) * k_ + pred]; }
  std::uint64_t total() const;

  /// Adds every pixel of one image. Throws ShapeError on a size mismatch and
  /// DataError on a label outside [0, K).
  void accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt);
  void accumulate(const SegmentationMask& pred, const SegmentationMask& gt);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<std::uint64_t> cells_;
};

struct ClassIou {
  std::string name;
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::optional<double> iou;  // empty when the union is zero ("absent")
};

struct MetricsReport {
  std::vector<ClassIou> per_class;
  double miou = 0.0;
  std::uint64_t pixels = 0;
  std::optional<double> fg_iou;  // set for two-class sets

  nlohmann::json to_json() const;
};

/// IoU per class and their mean over classes with a non-zero union. Throws
/// DataError when the matrix holds no pixels.
MetricsReport compute_miou(const ConfusionMatrix& cm, const std::vector<std::string>& names = {});

/// IoU of one class; empty when that class is absent from both prediction
/// and ground truth.
std::optional<double> compute_fg_iou(const ConfusionMatrix& cm, int fg_index);

}  // namespace ovseg
