#include "ovseg/numeric/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ovseg {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kTensorMagic), std::end(kTensorMagic));
  put_u32(out, kTensorVersion);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  auto fail = [&](const std::string& what) { return DataError("tensor file " + origin + ": " + what); };
  if (bytes.size() < 12) throw fail("truncated header");
  if (std::memcmp(bytes.data(), kTensorMagic, 4) != 0) throw fail("bad magic (expected SFUP)");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kTensorVersion) throw fail("unsupported version " + std::to_string(version));
  const std::uint32_t rank = get_u32(bytes.data() + 8);
  if (rank == 0 || rank > 16) throw fail("invalid rank " + std::to_string(rank));
  const std::size_t header = 12 + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < header) throw fail("truncated dims");
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes.data() + 12 + 4 * i);
    if (shape[i] == 0) throw fail("zero dimension");
    numel *= static_cast<std::uint64_t>(shape[i]);
    if (numel > (std::uint64_t{1} << 34)) throw fail("implausible element count");
  }
  if (bytes.size() != header + 4 * numel) {
    throw fail("payload holds " + std::to_string(bytes.size() - header) + " bytes, expected " +
               std::to_string(4 * numel));
  }
  std::vector<float> data(numel);
  const std::uint8_t* p = bytes.data() + header;
  for (std::uint64_t i = 0; i < numel; ++i) data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

}  // namespace ovseg
