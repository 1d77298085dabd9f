#pragma once

#include <string>

#include "sgdf/core/tensor.hpp"

namespace sgdf::data {

// Binary PGM (P5, 1 channel) and PPM (P6, 3 channels), 8- or 16-bit.
// Values are normalized so maxval maps to exactly 1.0.
Image read_pnm(const std::string& path);

// Writes P5 for 1-channel and P6 for 3-channel images. Values are clipped to
// [0,1] at quantization time only.
void write_pnm(const std::string& path, const Image& img, int bit_depth = 8);

}  // namespace sgdf::data
