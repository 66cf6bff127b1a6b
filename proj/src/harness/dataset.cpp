#include "hjscc/harness/dataset.hpp"

#include <algorithm>
#include <random>

#include "hjscc/harness/image_io.hpp"
#include "hjscc/harness/seeds.hpp"
#include "hjscc/harness/synth.hpp"

namespace hjscc::harness {

namespace {

int round_up(int v, int m) { return (v + m - 1) / m * m; }

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Tensor pad_edge(const Tensor& image, int height, int width) {
  const Shape s = image.shape();
  if (height < s.h || width < s.w) throw ContractError("pad_edge cannot shrink an image");
  Tensor out(Shape{s.c, height, width});
  for (int c = 0; c < s.c; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, std::min(y, s.h - 1), std::min(x, s.w - 1));
  return out;
}

ImageDataset ImageDataset::ingest(const std::filesystem::path& dir, const IngestOptions& options) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  ImageDataset ds;
  ds.options_ = options;
  for (const auto& f : files) {
    std::string error;
    auto img = load_image(f, &error);
    if (!img) {
      ds.warnings_.push_back("skipping " + f.filename().string() + ": " + error);
      continue;
    }
    if (options.split == Split::train &&
        (img->shape().h < options.crop || img->shape().w < options.crop)) {
      ds.warnings_.push_back("skipping " + f.filename().string() + ": smaller than the crop");
      continue;
    }
    ds.ids_.push_back(f.stem().string());
    ds.images_.push_back(std::move(*img));
  }
  if (ds.images_.empty()) throw ConfigError("no decodable images in " + dir.string());
  return ds;
}

ImageDataset ImageDataset::synthetic(int count, int height, int width, std::uint64_t seed,
                                     const IngestOptions& options) {
  if (count <= 0) throw ConfigError("synthetic dataset needs at least one image");
  ImageDataset ds;
  ds.options_ = options;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    ds.ids_.push_back(name);
    ds.images_.push_back(synthesize_image(height, width, derive_seed({seed, std::uint64_t(i)})));
  }
  return ds;
}

Sample ImageDataset::crop_at(std::size_t index, int top, int left, int size) const {
  const Tensor& src = images_[index];
  Tensor out(Shape{3, size, size});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) out.at(c, y, x) = src.at(c, top + y, left + x);
  return Sample{ids_[index], ImageTensor(std::move(out)), size, size};
}

Sample ImageDataset::train_sample(long step, int slot) const {
  std::mt19937_64 rng(derive_seed({options_.seed, 0x7a11ULL, std::uint64_t(step), std::uint64_t(slot)}));
  const std::size_t index = rng() % images_.size();
  const Shape s = images_[index].shape();
  const int crop = options_.crop;
  const int top = static_cast<int>(rng() % static_cast<std::uint64_t>(s.h - crop + 1));
  const int left = static_cast<int>(rng() % static_cast<std::uint64_t>(s.w - crop + 1));
  return crop_at(index, top, left, crop);
}

std::vector<Sample> ImageDataset::epoch(long epoch) const {
  std::vector<Sample> out;
  out.reserve(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) {
    std::mt19937_64 rng(derive_seed({options_.seed, 0xe90cULL, std::uint64_t(epoch), i}));
    const Shape s = images_[i].shape();
    const int crop = options_.crop;
    const int top = static_cast<int>(rng() % static_cast<std::uint64_t>(s.h - crop + 1));
    const int left = static_cast<int>(rng() % static_cast<std::uint64_t>(s.w - crop + 1));
    out.push_back(crop_at(i, top, left, crop));
  }
  return out;
}

Sample ImageDataset::eval_sample(std::size_t i) const {
  const Tensor& src = images_.at(i);
  const Shape s = src.shape();
  const int crop = options_.crop;
  if (crop > 0 && s.h >= crop && s.w >= crop) {
    return crop_at(i, (s.h - crop) / 2, (s.w - crop) / 2, crop);
  }
  const int d = std::max(1, options_.divisibility);
  const int h = round_up(s.h, d), w = round_up(s.w, d);
  return Sample{ids_[i], ImageTensor(pad_edge(src, h, w)), s.h, s.w};
}

std::vector<Sample> ImageDataset::eval_all() const {
  std::vector<Sample> out;
  out.reserve(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) out.push_back(eval_sample(i));
  return out;
}

}  // namespace hjscc::harness
