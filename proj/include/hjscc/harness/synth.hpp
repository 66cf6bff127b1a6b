#pragma once

#include <cstdint>
#include <filesystem>

#include "hjscc/tensor.hpp"

namespace hjscc::harness {

/// Procedural test image: gradient background, random shapes, optional stripes and
/// grain. Scene complexity varies with the seed, which gives per-image rate variation.
Tensor synthesize_image(int height, int width, std::uint64_t seed);

/// Writes `count` PNGs named synth_0000.png, ... into `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, int count, int height, int width,
                             std::uint64_t seed);

}  // namespace hjscc::harness
