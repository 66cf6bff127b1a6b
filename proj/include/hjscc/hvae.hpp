#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hjscc/nn.hpp"

namespace hjscc {

inline constexpr double kSigmaFloor = 1e-6;
inline const double kProbabilityFloor = std::ldexp(1.0, -64);

enum class Phase { train, eval };
enum class GenerateMode { posterior, prior_only };

/// A source image, 3 x H x W with values in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(Tensor data);

  const Tensor& tensor() const { return data_; }
  int height() const { return data_.shape().h; }
  int width() const { return data_.shape().w; }
  /// Source dimensions N = 3 * H * W.
  std::size_t source_dims() const { return data_.size(); }

 private:
  Tensor data_;
};

struct HierarchyConfig {
  /// Latent channels C_l, coarse to fine.
  std::vector<int> latent_channels{16, 16, 8};
  /// Downsampling factor of each level relative to the image, coarse to fine.
  std::vector<int> downsampling{8, 4, 2};
  int width = 32;
  int blocks = 1;

  int levels() const { return static_cast<int>(latent_channels.size()); }
  /// Throws ConfigError when the schedule is not a decreasing chain of integer ratios.
  void validate() const;
};

/// Per-level bottom-up features, coarse to fine.
using FeaturePyramid = std::vector<Var>;

struct PriorParams {
  Var mean;
  Var std;
};

struct LatentLevel {
  Var mu;          // posterior centre; equals z in prior-only mode
  Var prior_mean;  // Gaussian location
  Var prior_std;   // Gaussian scale, >= kSigmaFloor
  Var z;           // sample fed to the next level
  Var context;     // top-down state the level was generated from
};

struct LatentStack {
  std::vector<LatentLevel> levels;
  Var reconstruction;  // image rendered from the z path
};

struct RateTerms {
  std::vector<Var> neg_log_p;  // per level, same shape as z
  std::vector<Var> per_level;  // per level, scalar nats
  Var total;
};

/// Unit-bin probability mass of N(mean, std^2) * U(-1/2, 1/2) at z, floored at p_floor.
double prior_likelihood(double z, double mean, double std, double p_floor = kProbabilityFloor);

/// Train: mu + U(-1/2, 1/2) noise. Eval: round half away from zero.
Var posterior_sample(const Var& mu, Phase phase, std::mt19937_64& rng);

RateTerms rate_nats(const LatentStack& stack);

/// Hierarchical VAE: bottom-up analysis path plus the shared top-down path that
/// generates latents on the transmitter side and reconstructs images on the receiver side.
class Hvae {
 public:
  Hvae(const HierarchyConfig& config, nn::ParamStore& store, nn::Initializer& init);

  const HierarchyConfig& config() const { return config_; }
  int levels() const { return config_.levels(); }
  /// Shape of level l's latent for an H x W image.
  Shape level_shape(int level, int height, int width) const;
  void check_image_shape(int height, int width) const;

  FeaturePyramid bottom_up(const Var& x) const;

  /// Generates the latent stack. Posterior mode needs `features`; prior-only mode uses
  /// `forced_latents` as conditioning samples when given, otherwise the prior means.
  LatentStack top_down_generate(const FeaturePyramid* features, GenerateMode mode, Phase phase,
                                std::mt19937_64& rng, int height, int width,
                                const std::vector<Var>* forced_latents = nullptr) const;

  /// Receiver-side synthesis from one latent per level.
  Var decode_image(const std::vector<Var>& latents, int height, int width) const;

  // Single steps of the top-down path.
  Var initial_state(int height, int width) const;
  PriorParams prior(int level, const Var& state) const;
  Var posterior_mean(int level, const Var& state, const Var& feature) const;
  /// Folds a level's latent into the state and moves to the next resolution.
  Var absorb(int level, const Var& state, const Var& latent) const;
  Var render(const Var& state) const;

 private:
  struct DownStage {
    nn::Conv2d merge;
    nn::ResStack blocks;
  };
  struct TopDownStage {
    nn::Conv2d prior_hidden, prior_out;
    nn::Conv2d posterior_hidden, posterior_out;
    nn::Conv2d latent_in;
    nn::ResStack blocks;
    nn::Conv2d upsample;  // absent on the finest level
  };

  void check_level(int level) const;

  HierarchyConfig config_;
  std::vector<DownStage> down_;  // fine to coarse
  std::vector<TopDownStage> top_;
  Var bias_;
  nn::Conv2d render_;
};

}  // namespace hjscc
