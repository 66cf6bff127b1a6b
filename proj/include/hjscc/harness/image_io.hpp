#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hjscc/tensor.hpp"

namespace hjscc::harness {

/// Decodes a PNG or JPEG into a (3, H, W) tensor in [0, 1]. Returns nullopt and fills
/// `error` when the file cannot be decoded.
std::optional<Tensor> load_image(const std::filesystem::path& path, std::string* error = nullptr);

/// Writes a (3, H, W) tensor in [0, 1] as 8-bit RGB PNG.
void save_png(const std::filesystem::path& path, const Tensor& image);

/// Writes interleaved 8-bit RGB pixels as PNG.
void save_png_rgb8(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace hjscc::harness
