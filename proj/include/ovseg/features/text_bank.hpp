#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ovseg/numeric/tensor.hpp"

namespace ovseg {

struct SubclassEmbedding {
  std::string name;
  std::vector<float> embedding;  // unit L2 norm
};

struct TextClass {
  std::string name;
  std::vector<SubclassEmbedding> subclasses;  // at least one
};

/// Prompt vocabulary with per-subclass text embeddings. Class order is the
/// logit channel order.
struct TextEmbeddingBank {
  std::vector<TextClass> classes;
  bool normalized_on_load = false;

  std::size_t class_count() const { return classes.size(); }
  std::size_t subclass_count() const;
  std::int64_t width() const;
  std::vector<std::string> class_names() const;
  void validate() const;
};

/// Manifest: {"classes":[{"name":..., "subclasses":[...]}]}; a class without
/// "subclasses" (or given as a bare string) uses its own name. The embeddings
/// tensor holds one row per subclass in manifest order.
TextEmbeddingBank load_text_bank(const std::filesystem::path& manifest_path,
                                 const std::filesystem::path& embeddings_path);
void save_text_bank(const TextEmbeddingBank& bank, const std::filesystem::path& manifest_path,
                    const std::filesystem::path& embeddings_path);

struct ClassSpec {
  std::string name;
  std::vector<std::string> subclasses;
};

/// Seeded random unit vectors, one per subclass, in class order.
TextEmbeddingBank make_toy_bank(const std::vector<ClassSpec>& classes, std::int64_t width, std::uint64_t seed);

}  // namespace ovseg
