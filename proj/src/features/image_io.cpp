#include "ovseg/features/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace ovseg {
namespace {

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

PnmHeader read_header(std::istream& in, const char* magic, const std::filesystem::path& path) {
  const auto m = next_token(in);
  if (m != magic) throw DataError(path.string() + ": expected " + magic + " header, got '" + m + "'");
  PnmHeader h;
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed header");
  }
  if (h.width <= 0 || h.height <= 0) throw DataError(path.string() + ": non-positive image size");
  if (h.maxval <= 0 || h.maxval > 255) throw DataError(path.string() + ": only 8-bit images are supported");
  return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::vector<std::uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError(path.string() + ": truncated pixel data");
  return buf;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const auto h = read_header(in, "P6", path);
  const auto buf = read_payload(in, static_cast<std::size_t>(h.width) * h.height * 3, path);
  Tensor img({h.height, h.width, 3});
  const float scale = 255.0f / static_cast<float>(h.maxval);
  for (std::size_t i = 0; i < buf.size(); ++i) img[i] = (static_cast<float>(buf[i]) * scale) / 127.5f - 1.0f;
  return img;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  require_rank(image, 3, "write_ppm");
  if (image.dim(2) != 3) throw ShapeError("write_ppm: expected 3 channels, got " + shape_string(image.shape()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P6\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
  std::vector<std::uint8_t> buf(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], -1.0f, 1.0f);
    buf[i] = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mask " + path.string());
  const auto h = read_header(in, "P5", path);
  GrayImage g;
  g.width = h.width;
  g.height = h.height;
  g.pixels = read_payload(in, static_cast<std::size_t>(h.width) * h.height, path);
  return g;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw ShapeError("write_pgm: pixel count does not match size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace ovseg
