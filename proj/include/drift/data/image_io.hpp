#pragma once

#include "drift/image.hpp"

#include <filesystem>
#include <string>

namespace drift::data {

/// Binary PPM (3 channels) or PGM (1 channel), 8 bits per sample. Values are
/// clamped to [0, 1] and rounded to the nearest 1/255.
std::string encode_pnm(const Image& image);
void write_pnm(const std::filesystem::path& path, const Image& image);
Image decode_pnm(const std::string& bytes);
Image read_pnm(const std::filesystem::path& path);

/// Rounds every pixel to the 8-bit grid so file round-trips are exact.
void quantize_8bit(Image& image);

}  // namespace drift::data
