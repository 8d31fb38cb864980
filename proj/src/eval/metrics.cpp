#include "ovseg/eval/metrics.hpp"

namespace ovseg {

ConfusionMatrix::ConfusionMatrix(int classes) : k_(classes) {
  if (classes < 1) throw ArgumentError("confusion matrix needs at least one class");
  cells_.assign(static_cast<std::size_t>(classes) * classes, 0);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (auto c : cells_) n += c;
  return n;
}

void ConfusionMatrix::accumulate(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt) {
  if (pred.size() != gt.size())
    throw ShapeError("confusion: prediction has " + std::to_string(pred.size()) + " pixels, ground truth " +
                     std::to_string(gt.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= k_ || gt[i] < 0 || gt[i] >= k_)
      throw DataError("confusion: label outside [0, " + std::to_string(k_) + ") at pixel " + std::to_string(i));
    ++cells_[static_cast<std::size_t>(gt[i]) * k_ + pred[i]];
  }
}

void ConfusionMatrix::accumulate(const SegmentationMask& pred, const SegmentationMask& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ShapeError("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     " vs ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  accumulate(pred.labels, gt.labels);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("confusion: cannot merge matrices of different class counts");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
}

MetricsReport compute_miou(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  const int k = cm.classes();
  if (!names.empty() && static_cast<int>(names.size()) != k)
    throw ArgumentError("compute_miou: " + std::to_string(names.size()) + " names for " + std::to_string(k) +
                        " classes");
  MetricsReport r;
  r.pixels = cm.total();
  if (r.pixels == 0) throw DataError("compute_miou: confusion matrix is empty");
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    ClassIou ci;
    ci.name = names.empty() ? "class_" + std::to_string(c) : names[c];
    ci.intersection = cm.at(c, c);
    ci.union_ = row + col - ci.intersection;
    if (ci.union_ > 0) {
      ci.iou = static_cast<double>(ci.intersection) / static_cast<double>(ci.union_);
      sum += *ci.iou;
      ++present;
    }
    r.per_class.push_back(ci);
  }
  r.miou = sum / present;
  if (k == 2) r.fg_iou = compute_fg_iou(cm, 1);
  return r;
}

std::optional<double> compute_fg_iou(const ConfusionMatrix& cm, int fg_index) {
  if (fg_index < 0 || fg_index >= cm.classes()) throw ArgumentError("foreground index out of range");
  std::uint64_t row = 0, col = 0;
  for (int j = 0; j < cm.classes(); ++j) {
    row += cm.at(fg_index, j);
    col += cm.at(j, fg_index);
  }
  const std::uint64_t inter = cm.at(fg_index, fg_index);
  const std::uint64_t uni = row + col - inter;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : per_class) {
    nlohmann::json e{{"name", c.name}, {"intersection", c.intersection}, {"union", c.union_}};
    if (c.iou) {
      e["iou"] = *c.iou;
    } else {
      e["iou"] = nullptr;
      e["absent"] = true;
    }
    classes.push_back(e);
  }
  nlohmann::json j{{"miou", miou}, {"pixels", pixels}, {"per_class", classes}};
  if (per_class.size() == 2) j["fg_iou"] = fg_iou ? nlohmann::json(*fg_iou) : nlohmann::json(nullptr);
  return j;
}

}  // namespace ovseg
