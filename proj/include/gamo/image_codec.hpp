#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gamo/image.hpp"

namespace gamo {

// PNG or JPEG, sniffed from the leading bytes. Throws invalid_image.
FaceImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const FaceImage& image);
void write_png(const FaceImage& image, const std::filesystem::path& path);
FaceImage read_image(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws invalid_image on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace gamo
