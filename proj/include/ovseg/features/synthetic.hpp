#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

/// A seeded toy "aerial" scene: a shaded background (class 0) with
/// rectangles and disks of classes 1..classes-1, each class drawn in its
/// own colour family.
struct SyntheticScene {
  Tensor image;                      // H x W x 3 in [-1, 1]
  std::vector<std::uint8_t> labels;  // H x W, row-major
  int height = 0;
  int width = 0;
};

SyntheticScene synthetic_scene(int height, int width, std::uint64_t seed, int classes = 4);

/// Names used for the synthetic classes, index-aligned with scene labels.
std::vector<std::string> synthetic_class_names(int classes);

/// Writes `count` scenes as img_NNN.ppm into dir. With `with_masks`, also
/// writes mask_NNN.pgm and a dataset manifest.json next to them.
void write_synthetic_corpus(const std::filesystem::path& dir, int count, int height, int width, std::uint64_t seed,
                            int classes = 4, bool with_masks = false);

}  // namespace ovseg
