#pragma once

#include <filesystem>

#include "json.hpp"
#include "ovseg/features/toy_encoder.hpp"
#include "ovseg/upsampler/simfeatup.hpp"

namespace ovseg {

/// Everything inference needs to rebuild the upsampling path: the trained
/// parameters, the (frozen) encoder they were trained against and free-form
/// training metadata.
struct Checkpoint {
  SimFeatUpParams params;
  EncoderConfig encoder;
  nlohmann::json training = nlohmann::json::object();
};

/// Writes dir/index.json plus one .sfup file per tensor. CRN and downsampler
/// tensors are flagged training_only in the index.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

/// Throws DataError naming the path when the directory, index or a tensor is
/// missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

nlohmann::json encoder_config_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

}  // namespace ovseg
