#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hjscc/tensor.hpp"

namespace hjscc::rate {

/// Spatial grouping patch (rows, columns).
struct Patch {
  int h = 1;
  int w = 1;
  int area() const { return h * w; }
};

/// Finite set of allowed per-position symbol lengths, sorted ascending.
struct OptionSet {
  std::vector<int> values;
  /// Side-information bits spent on one length index.
  int index_bits = 4;

  /// Even-valued uniform grid {0, step, 2*step, ..., channels} with at most 2^index_bits entries.
  static OptionSet uniform(int channels, int index_bits);

  int max() const;
  bool contains(int length) const;
};

/// k[o] = alpha * sum_c neg_log_p[c, o]; returns a (1, H, W) map.
Tensor lengths_from_prior(const Tensor& neg_log_p, double alpha);

/// Replaces each value by the mean over its patch; edge patches average what they cover.
Tensor group_lengths(const Tensor& real_lengths, Patch patch);

/// Number of patches tiling an H x W map.
int group_count(int height, int width, Patch patch);

/// Smallest option >= k, clamped to the largest option.
int quantize_length(double k, const OptionSet& options, int channels);

/// Prefix mask: k_hat ones followed by zeros.
std::vector<std::uint8_t> make_mask(int k_hat, int channels);

/// (C, H, W) mask whose column at each position is make_mask(lengths[o], C).
Tensor mask_from_lengths(const std::vector<int>& lengths, Shape shape);

/// r * mask, elementwise.
Tensor apply_mask(const Tensor& r, const Tensor& mask);

/// Channel symbols needed to carry num_groups indices of index_bits bits at
/// bits_per_symbol bits per channel use.
double side_info_overhead(long num_groups, int index_bits, double bits_per_symbol);

/// Rate allocation for one hierarchy level.
struct LevelRatePlan {
  Tensor real_lengths;          // (1, H, W)
  Tensor merged_lengths;        // (1, H, W), constant on every patch
  std::vector<int> quantized;   // H * W, row-major, each in options
  Patch patch;
  OptionSet options;
  Shape shape;                  // latent shape (C, H, W)

  int groups() const { return group_count(shape.h, shape.w, patch); }
  long side_info_bits() const { return static_cast<long>(groups()) * options.index_bits; }
  /// Total unmasked real dimensions, sum of quantized lengths.
  long payload_reals() const;
  Tensor mask() const { return mask_from_lengths(quantized, shape); }
};

/// Full pipeline for one level: lengths, grouping, quantization.
LevelRatePlan plan_level(const Tensor& neg_log_p, double alpha, const OptionSet& options,
                         Patch patch);

/// Plan that transmits every channel at every position.
LevelRatePlan full_length_plan(Shape shape, const OptionSet& options, Patch patch);

/// Structured-text sidecar with the per-level quantized length arrays.
std::string plans_to_json(const std::vector<LevelRatePlan>& plans);

}  // namespace hjscc::rate
