#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "hjscc/channel.hpp"
#include "hjscc/hvae.hpp"
#include "hjscc/jscc.hpp"
#include "hjscc/rate_match.hpp"

namespace hjscc {

struct ModelConfig {
  HierarchyConfig hierarchy;
  CodecConfig codec;
  std::uint64_t init_seed = 1;
};

/// Owns the parameters of the hierarchical VAE and the per-level JSCC codecs.
class HjsccModel {
 public:
  explicit HjsccModel(const ModelConfig& config);
  HjsccModel(const HjsccModel&) = delete;
  HjsccModel& operator=(const HjsccModel&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const Hvae& hvae() const { return hvae_; }
  const JsccCodec& codec() const { return codec_; }

 private:
  ModelConfig config_;
  nn::ParamStore params_;
  nn::Initializer init_;
  Hvae hvae_;
  JsccCodec codec_;
};

struct RateConfig {
  int index_bits = 4;
  rate::Patch patch{2, 4};
  /// Side-information bits per channel use; defaults to the forward channel capacity.
  std::optional<double> bits_per_symbol;
  /// Optional explicit option set per level; otherwise OptionSet::uniform.
  std::vector<std::vector<int>> options;

  rate::OptionSet options_for(int level, int channels) const;
};

enum class PowerScope { per_image, per_level };

struct ForwardOptions {
  Phase phase = Phase::train;
  double alpha = 1.0;
  double lambda = 64.0;
  double beta = 1.0;
  channel::ChannelSpec channel;
  RateConfig rate;
  PowerScope power_scope = PowerScope::per_image;
  /// Feedback variant: fuse fed-back symbols into the transmitter state. When false the
  /// transmitter conditions on its own samples, as without feedback.
  bool feedback_conditioning = true;
  /// Transmit every channel at every position.
  bool full_length = false;
  /// Reuse these rate plans instead of deriving them from the prior.
  const std::vector<rate::LevelRatePlan>* forced_plans = nullptr;
  /// PSNR/CBR are measured on the top-left valid_height x valid_width region (0 = all).
  int valid_height = 0;
  int valid_width = 0;
};

/// Independent random streams for one transmission.
struct NoiseStreams {
  std::mt19937_64 posterior;
  std::mt19937_64 forward;
  std::mt19937_64 feedback;

  static NoiseStreams from_seed(std::uint64_t seed);
};

struct LossBreakdown {
  double rate_term = 0.0;        // nats per pixel entering the loss
  double rate_nats_total = 0.0;  // nats over the whole latent stack
  double reported_rate = 0.0;    // nats including -L log(beta) (feedback variant)
  double d_compress = 0.0;
  double d_transmit = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
};

struct TransmissionReport {
  double psnr_db = 0.0;           // x vs x_hat_H
  double psnr_compress_db = 0.0;  // x vs x_hat (no-feedback only)
  double cbr_total = 0.0;
  double cbr_payload = 0.0;
  double cbr_side_info = 0.0;
  std::vector<double> cbr_payload_per_level;
  long payload_reals = 0;
  double side_info_symbols = 0.0;
  double bits_per_symbol = 0.0;
  double snr_db = 0.0;
  std::optional<double> feedback_snr_db;
  std::vector<double> rate_nats_per_level;
  bool degenerate_power = false;
};

struct ForwardResult {
  Var x_hat;    // compression branch; undefined in the feedback variant
  Var x_hat_h;  // transmission branch
  Var loss;
  LossBreakdown breakdown;
  TransmissionReport report;
  LatentStack stack;
  std::vector<rate::LevelRatePlan> plans;
  std::vector<SymbolFrame> frames;
};

/// alpha * rate + lambda * (d_compress + d_transmit).
double loss_no_feedback(double rate, double d_compress, double d_transmit, double lambda,
                        double alpha);
Var loss_no_feedback(const Var& rate, const Var& d_compress, const Var& d_transmit,
                     double lambda, double alpha);

/// rate + lambda * d_transmit. The -log(beta) and constant terms carry no gradient and are
/// left out; beta is validated and only affects reported rates.
double loss_feedback(double rate, double d_transmit, double lambda, double beta);
Var loss_feedback(const Var& rate, const Var& d_transmit, double lambda, double beta);

/// 10 log10(1 / MSE) on [0, 1] data, 100 dB when identical.
double psnr(const ImageTensor& x, const ImageTensor& y);
double psnr(const Tensor& x, const Tensor& y, int valid_height = 0, int valid_width = 0);
inline constexpr double kPsnrCap = 100.0;

ForwardResult forward_no_feedback(const HjsccModel& model, const ImageTensor& x,
                                  const ForwardOptions& options, NoiseStreams& noise);

/// Sequential phases, coarse to fine; each level is power-normalized on its own since
/// later phases do not exist yet when a phase is sent.
ForwardResult forward_feedback(const HjsccModel& model, const ImageTensor& x,
                               const ForwardOptions& options, NoiseStreams& noise);

/// Sum over transmitted entries of log N(s~; s, sigma^2): the channel posterior term the
/// feedback loss leaves out.
Var channel_log_posterior(const std::vector<SymbolFrame>& frames, double sigma);

}  // namespace hjscc
