#include "hjscc/harness/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "hjscc/harness/image_io.hpp"

namespace hjscc::harness {

Tensor synthesize_image(int height, int width, std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto color = [&] { return std::array<double, 3>{u(rng), u(rng), u(rng)}; };

  Tensor img(Shape{3, height, width});
  const auto c0 = color();
  const auto c1 = color();
  const double angle = u(rng) * 2.0 * std::numbers::pi;
  const double gx = std::cos(angle), gy = std::sin(angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * (gx * (x / double(width) - 0.5) + gy * (y / double(height) - 0.5));
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = c0[c] + (c1[c] - c0[c]) * t;
    }
  }

  // Complexity level in [0, 1] drives shape count, stripe use and grain.
  const double complexity = u(rng);
  const int shapes = static_cast<int>(complexity * 10.0);
  for (int s = 0; s < shapes; ++s) {
    const auto c = color();
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double rx = (0.08 + 0.3 * u(rng)) * width, ry = (0.08 + 0.3 * u(rng)) * height;
    const bool ellipse = u(rng) < 0.5;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside) {
          for (int k = 0; k < 3; ++k) img.at(k, y, x) = c[k];
        }
      }
    }
  }

  if (u(rng) < complexity) {
    const double freq = 0.15 + 0.6 * u(rng);
    const double theta = u(rng) * std::numbers::pi;
    const double amp = 0.05 + 0.2 * u(rng);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double v = amp * std::sin(freq * (std::cos(theta) * x + std::sin(theta) * y));
        for (int c = 0; c < 3; ++c) img.at(c, y, x) += v;
      }
  }

  const double grain = 0.06 * complexity * u(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : img.vec()) v = std::clamp(v + grain * gauss(rng), 0.0, 1.0);
  return img;
}

void write_synthetic_dataset(const std::filesystem::path& dir, int count, int height, int width,
                             std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d.png", i);
    save_png(dir / name, synthesize_image(height, width, seed * 1000003ULL + i));
  }
}

}  // namespace hjscc::harness
