#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

// Binary layout: "SFUP", u32 version (1), u32 rank, rank x u32 dims,
// then row-major float32 values. All integers and floats little-endian.
inline constexpr char kTensorMagic[4] = {'S', 'F', 'U', 'P'};
inline constexpr std::uint32_t kTensorVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ovseg
