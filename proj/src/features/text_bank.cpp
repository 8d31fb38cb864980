#include "ovseg/features/text_bank.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "ovseg/numeric/rng.hpp"
#include "ovseg/numeric/tensor_io.hpp"

namespace ovseg {
namespace {

using nlohmann::json;

double l2_norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

}  // namespace

std::size_t TextEmbeddingBank::subclass_count() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.subclasses.size();
  return n;
}

std::int64_t TextEmbeddingBank::width() const {
  if (classes.empty() || classes.front().subclasses.empty()) return 0;
  return static_cast<std::int64_t>(classes.front().subclasses.front().embedding.size());
}

std::vector<std::string> TextEmbeddingBank::class_names() const {
  std::vector<std::string> names;
  for (const auto& c : classes) names.push_back(c.name);
  return names;
}

void TextEmbeddingBank::validate() const {
  if (classes.empty()) throw DataError("text bank: no classes");
  const auto w = width();
  for (const auto& c : classes) {
    if (c.subclasses.empty()) throw DataError("text bank: class '" + c.name + "' has no subclasses");
    for (const auto& s : c.subclasses) {
      if (static_cast<std::int64_t>(s.embedding.size()) != w || w == 0)
        throw DataError("text bank: inconsistent embedding width for '" + s.name + "'");
      if (std::abs(l2_norm(s.embedding) - 1.0) > 1e-5)
        throw DataError("text bank: embedding for '" + s.name + "' is not unit norm");
    }
  }
}

TextEmbeddingBank load_text_bank(const std::filesystem::path& manifest_path,
                                 const std::filesystem::path& embeddings_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open text bank manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": invalid JSON: " + e.what());
  }
  if (!manifest.contains("classes") || !manifest["classes"].is_array())
    throw DataError(manifest_path.string() + ": missing \"classes\" array");

  TextEmbeddingBank bank;
  for (const auto& entry : manifest["classes"]) {
    TextClass cls;
    if (entry.is_string()) {
      cls.name = entry.get<std::string>();
      cls.subclasses.push_back({cls.name, {}});
    } else if (entry.is_object() && entry.contains("name")) {
      cls.name = entry["name"].get<std::string>();
      if (entry.contains("subclasses")) {
        for (const auto& s : entry["subclasses"]) cls.subclasses.push_back({s.get<std::string>(), {}});
      } else {
        cls.subclasses.push_back({cls.name, {}});
      }
    } else {
      throw DataError(manifest_path.string() + ": class entries must be strings or objects with \"name\"");
    }
    if (cls.subclasses.empty()) throw DataError(manifest_path.string() + ": class '" + cls.name + "' has no subclasses");
    bank.classes.push_back(std::move(cls));
  }
  if (bank.classes.empty()) throw DataError(manifest_path.string() + ": no classes");

  const auto emb = load_tensor(embeddings_path);
  if (emb.rank() != 2) throw DataError(embeddings_path.string() + ": embeddings must be rank 2");
  if (emb.dim(0) != static_cast<std::int64_t>(bank.subclass_count())) {
    throw DataError(embeddings_path.string() + ": " + std::to_string(emb.dim(0)) + " rows but manifest lists " +
                    std::to_string(bank.subclass_count()) + " subclasses");
  }
  const auto width = emb.dim(1);
  std::int64_t row = 0;
  for (auto& cls : bank.classes) {
    for (auto& sub : cls.subclasses) {
      sub.embedding.assign(emb.data().begin() + row * width, emb.data().begin() + (row + 1) * width);
      const double n = l2_norm(sub.embedding);
      if (!(n > 0.0) || !std::isfinite(n)) {
        throw DataError(embeddings_path.string() + ": row " + std::to_string(row) + " ('" + sub.name +
                        "') is a zero or non-finite vector");
      }
      if (std::abs(n - 1.0) > 1e-5) {
        for (auto& v : sub.embedding) v = static_cast<float>(v / n);
        bank.normalized_on_load = true;
      }
      ++row;
    }
  }
  return bank;
}

void save_text_bank(const TextEmbeddingBank& bank, const std::filesystem::path& manifest_path,
                    const std::filesystem::path& embeddings_path) {
  bank.validate();
  json classes = json::array();
  std::vector<float> rows;
  for (const auto& c : bank.classes) {
    json subs = json::array();
    for (const auto& s : c.subclasses) {
      subs.push_back(s.name);
      rows.insert(rows.end(), s.embedding.begin(), s.embedding.end());
    }
    classes.push_back({{"name", c.name}, {"subclasses", subs}});
  }
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + manifest_path.string());
  out << json{{"classes", classes}}.dump(2) << "\n";
  save_tensor(embeddings_path, Tensor({static_cast<std::int64_t>(bank.subclass_count()), bank.width()}, rows));
}

TextEmbeddingBank make_toy_bank(const std::vector<ClassSpec>& classes, std::int64_t width, std::uint64_t seed) {
  if (width <= 0) throw ArgumentError("make_toy_bank: width must be positive");
  SplitMix64 rng(seed);
  TextEmbeddingBank bank;
  for (const auto& spec : classes) {
    TextClass cls{spec.name, {}};
    auto names = spec.subclasses.empty() ? std::vector<std::string>{spec.name} : spec.subclasses;
    for (const auto& n : names) {
      std::vector<float> v(static_cast<std::size_t>(width));
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& x : v) {
          x = static_cast<float>(rng.normal());
          norm += static_cast<double>(x) * x;
        }
      } while (norm < 1e-12);
      norm = std::sqrt(norm);
      for (auto& x : v) x = static_cast<float>(x / norm);
      cls.subclasses.push_back({n, std::move(v)});
    }
    bank.classes.push_back(std::move(cls));
  }
  return bank;
}

}  // namespace ovseg
