#pragma once

#include <vector>

#include "hjscc/hvae.hpp"
#include "hjscc/rate_match.hpp"

namespace hjscc {

struct CodecConfig {
  int width = 32;
  int blocks = 2;
  bool rate_attention = true;
  int attention_hidden = 16;
};

/// Per-level transmission record: pre-mask features, mask, sent and received symbols.
struct SymbolFrame {
  Var r;
  Tensor mask;
  Var s;
  Var s_tilde;
  std::vector<int> lengths;
};

/// One JSCC encoder/decoder pair per hierarchy level.
class JsccCodec {
 public:
  JsccCodec(const CodecConfig& config, const HierarchyConfig& hierarchy, nn::ParamStore& store,
            nn::Initializer& init);

  const CodecConfig& config() const { return config_; }

  /// Maps mu_l (with prior information and the transmitter's top-down context) to r_l.
  Var encode_layer(int level, const Var& mu, const Var& prior_info,
                   const rate::LevelRatePlan& plan, const Var& context) const;
  /// Same, with the length maps given as graph variables.
  Var encode_layer(int level, const Var& mu, const Var& prior_info, const Var& real_lengths,
                   const Var& merged_lengths, const Var& context) const;

  /// Feature-wise affine modulation driven by the real and merged length maps.
  /// Identity when the module is disabled or freshly initialized.
  Var rate_attention(int level, const Var& features, const Var& real_lengths,
                     const Var& merged_lengths) const;

  /// Recovers mu~_l. Entries beyond lengths[o] are zeroed before the network sees them.
  Var decode_layer(int level, const Var& s_tilde, const std::vector<int>& lengths,
                   const rate::OptionSet& options, const Var& context) const;

 private:
  struct Level {
    nn::Conv2d enc_in;
    nn::Conv2d attention_hidden;
    nn::Conv2d attention_out;
    nn::ResStack enc_blocks;
    nn::Conv2d enc_out;
    nn::Conv2d dec_in;
    nn::ResStack dec_blocks;
    nn::Conv2d dec_out;
    int channels = 0;
  };

  const Level& level_at(int level) const;

  CodecConfig config_;
  std::vector<Level> levels_;
};

}  // namespace hjscc
