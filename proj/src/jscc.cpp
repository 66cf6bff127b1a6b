#include "hjscc/jscc.hpp"

#include <string>

namespace hjscc {

JsccCodec::JsccCodec(const CodecConfig& config, const HierarchyConfig& hierarchy,
                     nn::ParamStore& store, nn::Initializer& init)
    : config_(config) {
  if (config_.width <= 0 || config_.blocks < 0 || config_.attention_hidden <= 0) {
    throw ConfigError("invalid codec configuration");
  }
  const int ctx = hierarchy.width;
  const int w = config_.width;
  for (int l = 0; l < hierarchy.levels(); ++l) {
    const int c = hierarchy.latent_channels[l];
    const std::string name = "jscc." + std::to_string(l);
    Level lv;
    lv.channels = c;
    lv.enc_in = nn::Conv2d(store, init, name + ".enc_in", 3 * c + ctx, w, 3);
    if (config_.rate_attention) {
      lv.attention_hidden =
          nn::Conv2d(store, init, name + ".rate_attention.hidden", 2, config_.attention_hidden, 1);
      lv.attention_out = nn::Conv2d(store, init, name + ".rate_attention.out",
                                    config_.attention_hidden, 2 * w, 1, 1, 0.0);
    }
    lv.enc_blocks = nn::ResStack(store, init, name + ".enc", w, config_.blocks);
    lv.enc_out = nn::Conv2d(store, init, name + ".enc_out", w, c, 3);
    lv.dec_in = nn::Conv2d(store, init, name + ".dec_in", c + 1 + ctx, w, 3);
    lv.dec_blocks = nn::ResStack(store, init, name + ".dec", w, config_.blocks);
    lv.dec_out = nn::Conv2d(store, init, name + ".dec_out", w, c, 3);
    levels_.push_back(std::move(lv));
  }
}

const JsccCodec::Level& JsccCodec::level_at(int level) const {
  if (level < 0 || level >= static_cast<int>(levels_.size())) {
    throw ContractError("codec level " + std::to_string(level) + " out of range");
  }
  return levels_[level];
}

Var JsccCodec::rate_attention(int level, const Var& features, const Var& real_lengths,
                              const Var& merged_lengths) const {
  const Level& lv = level_at(level);
  if (!config_.rate_attention) return features;
  const Shape fs = features.shape();
  if (real_lengths.shape() != Shape{1, fs.h, fs.w} ||
      merged_lengths.shape() != Shape{1, fs.h, fs.w}) {
    throw ContractError("length maps must be (1, H, W) aligned with the features");
  }
  // Lengths enter as fractions of the channel count.
  Var lengths = ops::scale(ops::concat_channels({real_lengths, merged_lengths}),
                           1.0 / static_cast<double>(lv.channels));
  Var mod = lv.attention_out(ops::silu(lv.attention_hidden(lengths)));
  Var gain = ops::slice_channels(mod, 0, fs.c);
  Var shift = ops::slice_channels(mod, fs.c, fs.c);
  return ops::add(ops::add(features, ops::mul(features, gain)), shift);
}

Var JsccCodec::encode_layer(int level, const Var& mu, const Var& prior_info,
                            const rate::LevelRatePlan& plan, const Var& context) const {
  return encode_layer(level, mu, prior_info, Var(plan.real_lengths), Var(plan.merged_lengths),
                      context);
}

Var JsccCodec::encode_layer(int level, const Var& mu, const Var& prior_info,
                            const Var& real_lengths, const Var& merged_lengths,
                            const Var& context) const {
  const Level& lv = level_at(level);
  const Shape ms = mu.shape();
  if (ms.c != lv.channels) throw ContractError("encode_layer: mu channel mismatch");
  if (prior_info.shape() != Shape{2 * ms.c, ms.h, ms.w}) {
    throw ContractError("encode_layer: prior information must be (2C, H, W) aligned with mu");
  }
  Var h = lv.enc_in(ops::concat_channels({mu, prior_info, context}));
  h = rate_attention(level, h, real_lengths, merged_lengths);
  return lv.enc_out(lv.enc_blocks(h));
}

Var JsccCodec::decode_layer(int level, const Var& s_tilde, const std::vector<int>& lengths,
                            const rate::OptionSet& options, const Var& context) const {
  const Level& lv = level_at(level);
  const Shape ss = s_tilde.shape();
  if (ss.c != lv.channels) throw ContractError("decode_layer: symbol channel mismatch");
  if (options.max() > lv.channels) throw ContractError("decode_layer: options exceed channels");
  for (int k : lengths) {
    if (!options.contains(k)) {
      throw ContractError("decode_layer: length " + std::to_string(k) + " not in option set");
    }
  }
  const Tensor mask = rate::mask_from_lengths(lengths, ss);
  Tensor length_map(Shape{1, ss.h, ss.w});
  for (std::size_t o = 0; o < lengths.size(); ++o) {
    length_map[o] = static_cast<double>(lengths[o]) / lv.channels;
  }
  Var received = ops::mul(s_tilde, Var(mask));
  Var h = lv.dec_in(ops::concat_channels({received, Var(std::move(length_map)), context}));
  return lv.dec_out(lv.dec_blocks(h));
}

}  // namespace hjscc
