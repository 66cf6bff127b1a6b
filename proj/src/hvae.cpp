#include "hjscc/hvae.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hjscc {

ImageTensor::ImageTensor(Tensor data) : data_(std::move(data)) {
  if (data_.shape().c != 3) throw ContractError("image must have 3 channels, got " + data_.shape().str());
  for (double v : data_.vec()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("image values must lie in [0, 1]");
  }
}

void HierarchyConfig::validate() const {
  if (latent_channels.empty()) throw ConfigError("hierarchy needs at least one level");
  if (latent_channels.size() != downsampling.size()) {
    throw ConfigError("latent_channels and downsampling must have one entry per level");
  }
  if (width <= 0 || blocks < 0) throw ConfigError("invalid hierarchy width/blocks");
  for (int c : latent_channels) {
    if (c <= 0 || c % 2 != 0) {
      throw ConfigError("latent channel counts must be positive and even (complex pairing)");
    }
  }
  if (downsampling.back() < 1) throw ConfigError("downsampling factors must be >= 1");
  for (std::size_t i = 0; i + 1 < downsampling.size(); ++i) {
    const int coarse = downsampling[i];
    const int fine = downsampling[i + 1];
    if (fine <= 0 || coarse < fine || coarse % fine != 0) {
      throw ConfigError("downsampling factors must be non-increasing integer multiples");
    }
  }
}

double prior_likelihood(double z, double mean, double std, double p_floor) {
  if (!(std > 0.0)) throw std::domain_error("prior_likelihood: sigma must be positive");
  const double d = std::abs(z - mean);
  const double k = 1.0 / (std * std::numbers::sqrt2);
  const double p = 0.5 * (std::erfc((d - 0.5) * k) - std::erfc((d + 0.5) * k));
  return std::max(p, p_floor);
}

Var posterior_sample(const Var& mu, Phase phase, std::mt19937_64& rng) {
  if (phase == Phase::eval) return ops::round_straight_through(mu);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Tensor noise(mu.shape());
  for (auto& v : noise.vec()) {
    do {
      v = dist(rng);
    } while (v == -0.5);
  }
  return ops::add(mu, Var(std::move(noise)));
}

RateTerms rate_nats(const LatentStack& stack) {
  RateTerms terms;
  for (const auto& level : stack.levels) {
    Var nlp = ops::neg_log_binned_gaussian(level.z, level.prior_mean, level.prior_std,
                                           kProbabilityFloor);
    Var total = ops::sum(nlp);
    terms.neg_log_p.push_back(nlp);
    terms.per_level.push_back(total);
    terms.total = terms.total.defined() ? ops::add(terms.total, total) : total;
  }
  if (!terms.total.defined()) terms.total = Var(Tensor::scalar(0.0));
  return terms;
}

Hvae::Hvae(const HierarchyConfig& config, nn::ParamStore& store, nn::Initializer& init)
    : config_(config) {
  config_.validate();
  const int levels = config_.levels();
  const int w = config_.width;

  // Bottom-up stages run fine to coarse: stage 0 maps the image to the finest level.
  for (int i = 0; i < levels; ++i) {
    const int level = levels - 1 - i;
    const int factor = i == 0 ? config_.downsampling[level]
                              : config_.downsampling[level] / config_.downsampling[level + 1];
    const std::string name = "bottom_up." + std::to_string(level);
    DownStage stage;
    stage.merge = nn::Conv2d(store, init, name + ".merge", i == 0 ? 3 : w, w, factor, factor);
    stage.blocks = nn::ResStack(store, init, name, w, config_.blocks);
    down_.push_back(std::move(stage));
  }

  bias_ = store.create("top_down.bias", Tensor(Shape{w, 1, 1}, 0.0));
  for (int level = 0; level < levels; ++level) {
    const int c = config_.latent_channels[level];
    const std::string name = "top_down." + std::to_string(level);
    TopDownStage stage;
    stage.prior_hidden = nn::Conv2d(store, init, name + ".prior_hidden", w, w, 3);
    stage.prior_out = nn::Conv2d(store, init, name + ".prior_out", w, 2 * c, 3, 1, 0.5);
    stage.posterior_hidden = nn::Conv2d(store, init, name + ".posterior_hidden", 2 * w, w, 3);
    stage.posterior_out = nn::Conv2d(store, init, name + ".posterior_out", w, c, 3);
    stage.latent_in = nn::Conv2d(store, init, name + ".latent_in", c, w, 1);
    stage.blocks = nn::ResStack(store, init, name, w, config_.blocks);
    if (level + 1 < levels) {
      const int r = config_.downsampling[level] / config_.downsampling[level + 1];
      stage.upsample = nn::Conv2d(store, init, name + ".upsample", w, w * r * r, 3);
    }
    top_.push_back(std::move(stage));
  }
  const int r = config_.downsampling.back();
  render_ = nn::Conv2d(store, init, "top_down.render", w, 3 * r * r, 3, 1, 0.5);
}

void Hvae::check_level(int level) const {
  if (level < 0 || level >= levels()) {
    throw ContractError("level index " + std::to_string(level) + " out of range");
  }
}

void Hvae::check_image_shape(int height, int width) const {
  const int f = config_.downsampling.front();
  if (height <= 0 || width <= 0 || height % f != 0 || width % f != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by the coarsest downsampling factor " +
                      std::to_string(f));
  }
}

Shape Hvae::level_shape(int level, int height, int width) const {
  check_level(level);
  const int f = config_.downsampling[level];
  return Shape{config_.latent_channels[level], height / f, width / f};
}

FeaturePyramid Hvae::bottom_up(const Var& x) const {
  if (x.shape().c != 3) throw ContractError("bottom_up expects a 3-channel image");
  check_image_shape(x.shape().h, x.shape().w);
  FeaturePyramid features(levels());
  Var h = x;
  for (int i = 0; i < levels(); ++i) {
    h = down_[i].blocks(down_[i].merge(h));
    features[levels() - 1 - i] = h;
  }
  return features;
}

Var Hvae::initial_state(int height, int width) const {
  check_image_shape(height, width);
  const int f = config_.downsampling.front();
  return ops::broadcast_spatial(bias_, height / f, width / f);
}

PriorParams Hvae::prior(int level, const Var& state) const {
  check_level(level);
  const auto& st = top_[level];
  const int c = config_.latent_channels[level];
  Var out = st.prior_out(ops::silu(st.prior_hidden(state)));
  Var mean = ops::slice_channels(out, 0, c);
  Var std = ops::floor_at(ops::softplus(ops::slice_channels(out, c, c)), kSigmaFloor);
  return {mean, std};
}

Var Hvae::posterior_mean(int level, const Var& state, const Var& feature) const {
  check_level(level);
  const auto& st = top_[level];
  return st.posterior_out(ops::silu(st.posterior_hidden(ops::concat_channels({state, feature}))));
}

Var Hvae::absorb(int level, const Var& state, const Var& latent) const {
  check_level(level);
  const auto& st = top_[level];
  const Shape expect{config_.latent_channels[level], state.shape().h, state.shape().w};
  if (!(latent.shape() == expect)) {
    throw ContractError("level " + std::to_string(level) + " latent has shape " +
                        latent.shape().str() + ", expected " + expect.str());
  }
  Var h = st.blocks(ops::add(state, st.latent_in(latent)));
  if (level + 1 < levels()) {
    const int r = config_.downsampling[level] / config_.downsampling[level + 1];
    h = ops::pixel_shuffle(st.upsample(h), r);
  }
  return h;
}

Var Hvae::render(const Var& state) const {
  const int r = config_.downsampling.back();
  return ops::clamp01(ops::add_scalar(ops::pixel_shuffle(render_(state), r), 0.5));
}

LatentStack Hvae::top_down_generate(const FeaturePyramid* features, GenerateMode mode,
                                    Phase phase, std::mt19937_64& rng, int height, int width,
                                    const std::vector<Var>* forced_latents) const {
  if (mode == GenerateMode::posterior &&
      (features == nullptr || static_cast<int>(features->size()) != levels())) {
    throw ContractError("posterior generation needs one feature map per level");
  }
  if (forced_latents != nullptr && static_cast<int>(forced_latents->size()) != levels()) {
    throw ContractError("forced latents need one entry per level");
  }
  LatentStack stack;
  Var state = initial_state(height, width);
  for (int level = 0; level < levels(); ++level) {
    LatentLevel out;
    out.context = state;
    PriorParams p = prior(level, state);
    out.prior_mean = p.mean;
    out.prior_std = p.std;
    if (mode == GenerateMode::posterior) {
      out.mu = posterior_mean(level, state, (*features)[level]);
      out.z = posterior_sample(out.mu, phase, rng);
    } else {
      out.z = forced_latents != nullptr ? (*forced_latents)[level] : p.mean;
      out.mu = out.z;
    }
    state = absorb(level, state, out.z);
    stack.levels.push_back(std::move(out));
  }
  stack.reconstruction = render(state);
  return stack;
}

Var Hvae::decode_image(const std::vector<Var>& latents, int height, int width) const {
  if (static_cast<int>(latents.size()) != levels()) {
    throw ContractError("decode_image needs " + std::to_string(levels()) + " latents, got " +
                        std::to_string(latents.size()));
  }
  Var state = initial_state(height, width);
  for (int level = 0; level < levels(); ++level) state = absorb(level, state, latents[level]);
  return render(state);
}

}  // namespace hjscc
