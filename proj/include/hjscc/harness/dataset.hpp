#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hjscc/hvae.hpp"

namespace hjscc::harness {

enum class Split { train, eval };

/// One image prepared for the model. `height`/`width` are the original extent before padding.
struct Sample {
  std::string id;
  ImageTensor image;
  int height = 0;
  int width = 0;
};

struct IngestOptions {
  Split split = Split::train;
  /// Train: random crop size. Eval: centre crop size, or 0 to keep full images.
  int crop = 32;
  /// Eval images are edge-padded so both sides are multiples of this.
  int divisibility = 8;
  std::uint64_t seed = 0;
};

/// Decoded images of a directory in sorted file-name order.
class ImageDataset {
 public:
  /// Unreadable files are skipped and listed in warnings(); throws ConfigError when nothing
  /// decodable remains.
  static ImageDataset ingest(const std::filesystem::path& dir, const IngestOptions& options);
  /// Procedural images, for runs without a dataset on disk.
  static ImageDataset synthetic(int count, int height, int width, std::uint64_t seed,
                                const IngestOptions& options);

  std::size_t size() const { return images_.size(); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }

  /// Train split: crop of a pseudo-randomly chosen image, a pure function of (seed, step, slot).
  Sample train_sample(long step, int slot) const;
  /// One crop per image for a pass over the data, deterministic in (seed, epoch).
  std::vector<Sample> epoch(long epoch) const;
  /// Eval split: image i centre-cropped or padded to divisibility.
  Sample eval_sample(std::size_t i) const;
  std::vector<Sample> eval_all() const;

 private:
  Sample crop_at(std::size_t index, int top, int left, int size) const;

  IngestOptions options_;
  std::vector<std::string> ids_;
  std::vector<Tensor> images_;
  std::vector<std::string> warnings_;
};

/// Replicates the last row/column until the image is height x width.
Tensor pad_edge(const Tensor& image, int height, int width);

}  // namespace hjscc::harness
