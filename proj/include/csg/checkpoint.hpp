#pragma once

#include <filesystem>
#include <string>

#include "csg/gconv.hpp"

namespace csg {

enum class CheckpointFormat { binary, json };

/// Config header, then per layer: w in [p][q][k] order, b, mu (row-major), log sigma.
/// Output is a pure function of the parameters.
std::string encode_checkpoint(const NetworkParams& params, CheckpointFormat format);
NetworkParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     CheckpointFormat format = CheckpointFormat::binary);
/// Detects the format from the content. Throws DataError naming the path when missing.
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace csg
