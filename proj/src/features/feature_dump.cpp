#include "ovseg/features/feature_dump.hpp"

#include <fstream>
#include <map>
#include <string>

#include "ovseg/numeric/tensor_io.hpp"

namespace ovseg {

std::filesystem::path feature_meta_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".meta";
  return p;
}

void save_feature_dump(const std::filesystem::path& path, const TokenSequence& seq) {
  seq.validate();
  save_tensor(path, seq.tokens);
  std::ofstream meta(feature_meta_path(path), std::ios::trunc);
  if (!meta) throw DataError("cannot write " + feature_meta_path(path).string());
  meta << "h=" << seq.h << "\nw=" << seq.w << "\ndim=" << seq.dim() << "\n";
}

TokenSequence load_feature_dump(const std::filesystem::path& path) {
  const auto meta_path = feature_meta_path(path);
  std::ifstream meta(meta_path);
  if (!meta) throw DataError("missing feature metadata " + meta_path.string());
  std::map<std::string, long long> kv;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(meta_path.string() + ": malformed line '" + line + "'");
    try {
      kv[line.substr(0, eq)] = std::stoll(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw DataError(meta_path.string() + ": non-integer value in '" + line + "'");
    }
  }
  for (const char* key : {"h", "w", "dim"}) {
    if (!kv.count(key)) throw DataError(meta_path.string() + ": missing key '" + key + "'");
  }
  auto tokens = load_tensor(path);
  if (tokens.rank() != 2) {
    throw DataError(path.string() + ": feature dump must be rank 2, got " + shape_string(tokens.shape()));
  }
  const long long h = kv["h"], w = kv["w"], dim = kv["dim"];
  if (h <= 0 || w <= 0 || tokens.dim(0) != 1 + h * w) {
    throw DataError(path.string() + ": " + std::to_string(tokens.dim(0)) + " tokens do not equal 1 + h*w for grid " +
                    std::to_string(h) + "x" + std::to_string(w));
  }
  if (tokens.dim(1) != dim) {
    throw DataError(path.string() + ": token width " + std::to_string(tokens.dim(1)) + " differs from dim=" +
                    std::to_string(dim));
  }
  return TokenSequence{std::move(tokens), static_cast<int>(h), static_cast<int>(w)};
}

}  // namespace ovseg
