#pragma once

#include <filesystem>

#include "harmony/dove/feature_map.hpp"

namespace harmony::dove {

/// Weight file: one ASCII header line `out in kh kw`, then out*in*kh*kw
/// little-endian float32 kernel values in (out, in, ky, kx) order, then `out`
/// float32 biases.
ConvWeights<float> read_conv_weights(const std::filesystem::path& path);
void write_conv_weights(const std::filesystem::path& path, const ConvWeights<float>& w);

}  // namespace harmony::dove
