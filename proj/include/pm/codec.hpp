#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pm {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Encodes a solid-colour RGB image as PNG.
std::vector<unsigned char> encode_solid_png(std::uint32_t width, std::uint32_t height, Rgb color);

struct PngInfo {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Fully decodes `bytes`; nullopt if they are not a valid PNG.
std::optional<PngInfo> decode_png_info(std::span<const unsigned char> bytes);

std::string base64_encode(std::span<const unsigned char> bytes);
/// nullopt on malformed input.
std::optional<std::vector<unsigned char>> base64_decode(std::string_view text);

}  // namespace pm
