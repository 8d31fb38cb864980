#include "ovseg/upsampler/checkpoint.hpp"

#include <fstream>

#include "ovseg/numeric/tensor_io.hpp"

namespace ovseg {
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "ovseg-simfeatup";

bool training_only(const std::string& name) { return name.rfind("jbu.", 0) != 0; }

}  // namespace

nlohmann::json encoder_config_json(const EncoderConfig& cfg) {
  return {{"patch_size", cfg.patch_size}, {"depth", cfg.depth}, {"dim", cfg.dim},
          {"proj_dim", cfg.proj_dim},     {"heads", cfg.heads}, {"seed", cfg.seed}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.patch_size = j.value("patch_size", cfg.patch_size);
  cfg.depth = j.value("depth", cfg.depth);
  cfg.dim = j.value("dim", cfg.dim);
  cfg.proj_dim = j.value("proj_dim", cfg.proj_dim);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  const auto& p = ckpt.params;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : p.to_params()) {
    const std::string file = name + ".sfup";
    save_tensor(dir / file, t);
    tensors.push_back({{"name", name}, {"file", file}, {"training_only", training_only(name)}});
  }
  nlohmann::json index{{"format", kFormat},
                       {"version", 1},
                       {"factor", p.factor},
                       {"radius", p.jbu.radius},
                       {"encoder", encoder_config_json(ckpt.encoder)},
                       {"tensors", tensors},
                       {"training", ckpt.training}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << "\n";
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path index_path = dir / "index.json";
  if (!fs::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
  std::ifstream in(index_path);
  if (!in) throw DataError("checkpoint index not found: " + index_path.string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(index_path.string() + ": invalid JSON: " + e.what());
  }
  if (!index.is_object() || index.value("format", "") != kFormat)
    throw DataError(index_path.string() + ": not a SimFeatUp checkpoint");

  try {
    ParamSet<float> params;
    for (const auto& e : index.at("tensors"))
      params[e.at("name").get<std::string>()] = load_tensor(dir / e.at("file").get<std::string>());
    Checkpoint ckpt;
    ckpt.params.factor = index.at("factor").get<int>();
    ckpt.params.jbu.radius = index.at("radius").get<int>();
    upsample_stages(ckpt.params.factor);
    ckpt.params.assign(params);
    ckpt.encoder = encoder_config_from_json(index.at("encoder"));
    ckpt.training = index.value("training", nlohmann::json::object());
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(index_path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw DataError(index_path.string() + ": " + e.what());
  }
}

}  // namespace ovseg
