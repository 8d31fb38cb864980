#pragma once

#include <filesystem>

#include "ovseg/features/tokens.hpp"

namespace ovseg {

/// Sidecar metadata path for a feature dump: "<path>.meta".
std::filesystem::path feature_meta_path(const std::filesystem::path& path);

/// Writes the token matrix in tensor format plus "h=", "w=", "dim=" lines.
void save_feature_dump(const std::filesystem::path& path, const TokenSequence& seq);
TokenSequence load_feature_dump(const std::filesystem::path& path);

}  // namespace ovseg
