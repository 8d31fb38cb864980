#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

/// Reads a binary PPM (P6, maxval <= 255) into H x W x 3 with values v/127.5 - 1.
Tensor read_ppm(const std::filesystem::path& path);
/// Inverse mapping of read_ppm; values are clamped to [-1, 1] and rounded.
void write_ppm(const std::filesystem::path& path, const Tensor& image);

struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace ovseg
