#include "hjscc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hjscc {

HjsccModel::HjsccModel(const ModelConfig& config)
    : config_(config),
      init_(config.init_seed),
      hvae_(config.hierarchy, params_, init_),
      codec_(config.codec, config.hierarchy, params_, init_) {}

rate::OptionSet RateConfig::options_for(int level, int channels) const {
  if (level < static_cast<int>(options.size()) && !options[level].empty()) {
    rate::OptionSet set;
    set.values = options[level];
    set.index_bits = index_bits;
    if (!std::is_sorted(set.values.begin(), set.values.end()) || set.values.front() < 0 ||
        set.values.back() > channels) {
      throw ConfigError("level " + std::to_string(level + 1) +
                        " option set must be sorted within [0, C]");
    }
    if (set.values.size() > (std::size_t{1} << index_bits)) {
      throw ConfigError("option set larger than 2^index_bits");
    }
    return set;
  }
  return rate::OptionSet::uniform(channels, index_bits);
}

NoiseStreams NoiseStreams::from_seed(std::uint64_t seed) {
  std::seed_seq a{seed, std::uint64_t{0x9e3779b9}, std::uint64_t{1}};
  std::seed_seq b{seed, std::uint64_t{0x9e3779b9}, std::uint64_t{2}};
  std::seed_seq c{seed, std::uint64_t{0x9e3779b9}, std::uint64_t{3}};
  return NoiseStreams{std::mt19937_64(a), std::mt19937_64(b), std::mt19937_64(c)};
}

namespace {

void require_non_negative(double v, const char* what) {
  if (v < 0.0 || std::isnan(v)) throw ContractError(std::string(what) + " must be non-negative");
}

struct Geometry {
  int height;
  int width;
  int valid_height;
  int valid_width;
};

Geometry geometry_of(const ImageTensor& x, const ForwardOptions& o) {
  Geometry g{x.height(), x.width(), o.valid_height > 0 ? o.valid_height : x.height(),
             o.valid_width > 0 ? o.valid_width : x.width()};
  if (g.valid_height > g.height || g.valid_width > g.width) {
    throw ContractError("valid region exceeds the image");
  }
  return g;
}

void check_options(const HjsccModel& model, const ForwardOptions& o) {
  if (!(o.alpha > 0.0)) throw std::domain_error("alpha must be positive");
  if (!(o.beta > 0.0)) throw std::domain_error("beta must be positive");
  require_non_negative(o.lambda, "lambda");
  o.channel.validate();
  if (o.forced_plans != nullptr &&
      static_cast<int>(o.forced_plans->size()) != model.hvae().levels()) {
    throw ContractError("forced plans need one entry per level");
  }
}

rate::LevelRatePlan make_plan(int level, const Var& neg_log_p, const ForwardOptions& o) {
  if (o.forced_plans != nullptr) {
    const auto& plan = (*o.forced_plans)[level];
    if (!(plan.shape == neg_log_p.shape())) throw ContractError("forced plan shape mismatch");
    return plan;
  }
  const rate::OptionSet options = o.rate.options_for(level, neg_log_p.shape().c);
  if (o.full_length) return rate::full_length_plan(neg_log_p.shape(), options, o.rate.patch);
  return rate::plan_level(neg_log_p.value(), o.alpha, options, o.rate.patch);
}

Var prior_info(const Var& mean, const Var& std) { return ops::concat_channels({mean, std}); }

// Fills CBR bookkeeping from the final plans.
void account_rates(const std::vector<rate::LevelRatePlan>& plans, const ForwardOptions& o,
                   const Geometry& g, TransmissionReport& report) {
  report.bits_per_symbol =
      o.rate.bits_per_symbol.value_or(channel::capacity_bits_per_symbol(o.channel.snr_db));
  report.snr_db = o.channel.snr_db;
  report.feedback_snr_db = o.channel.feedback_snr_db;
  report.cbr_payload = 0.0;
  report.payload_reals = 0;
  report.side_info_symbols = 0.0;
  for (const auto& p : plans) {
    const long reals = p.payload_reals();
    report.payload_reals += reals;
    const double level_cbr =
        channel::compute_cbr(static_cast<double>(reals) / 2.0, g.valid_height, g.valid_width);
    report.cbr_payload_per_level.push_back(level_cbr);
    report.cbr_payload += level_cbr;
    report.side_info_symbols +=
        rate::side_info_overhead(p.groups(), p.options.index_bits, report.bits_per_symbol);
  }
  report.cbr_side_info =
      channel::compute_cbr(report.side_info_symbols, g.valid_height, g.valid_width);
  report.cbr_total = report.cbr_payload + report.cbr_side_info;
}

}  // namespace

double loss_no_feedback(double rate, double d_compress, double d_transmit, double lambda,
                        double alpha) {
  require_non_negative(rate, "rate");
  require_non_negative(d_compress, "d_compress");
  require_non_negative(d_transmit, "d_transmit");
  require_non_negative(lambda, "lambda");
  if (!(alpha > 0.0)) throw ContractError("alpha must be positive");
  return alpha * rate + lambda * (d_compress + d_transmit);
}

Var loss_no_feedback(const Var& rate, const Var& d_compress, const Var& d_transmit,
                     double lambda, double alpha) {
  // Validates the values through the scalar overload.
  loss_no_feedback(rate.value().item(), d_compress.value().item(), d_transmit.value().item(),
                   lambda, alpha);
  return ops::add(ops::scale(rate, alpha), ops::scale(ops::add(d_compress, d_transmit), lambda));
}

double loss_feedback(double rate, double d_transmit, double lambda, double beta) {
  require_non_negative(rate, "rate");
  require_non_negative(d_transmit, "d_transmit");
  require_non_negative(lambda, "lambda");
  if (!(beta > 0.0)) throw ContractError("beta must be positive");
  return rate + lambda * d_transmit;
}

Var loss_feedback(const Var& rate, const Var& d_transmit, double lambda, double beta) {
  loss_feedback(rate.value().item(), d_transmit.value().item(), lambda, beta);
  return ops::add(rate, ops::scale(d_transmit, lambda));
}

double psnr(const Tensor& x, const Tensor& y, int valid_height, int valid_width) {
  require_same_shape(x, y, "psnr");
  const Shape s = x.shape();
  const int h = valid_height > 0 ? valid_height : s.h;
  const int w = valid_width > 0 ? valid_width : s.w;
  if (h > s.h || w > s.w) throw ContractError("psnr region exceeds the image");
  double acc = 0.0;
  for (int c = 0; c < s.c; ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const double d = x.at(c, yy, xx) - y.at(c, yy, xx);
        acc += d * d;
      }
  const double mse = acc / (static_cast<double>(s.c) * h * w);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const ImageTensor& x, const ImageTensor& y) { return psnr(x.tensor(), y.tensor()); }

ForwardResult forward_no_feedback(const HjsccModel& model, const ImageTensor& image,
                                  const ForwardOptions& o, NoiseStreams& noise) {
  check_options(model, o);
  const Hvae& hvae = model.hvae();
  const JsccCodec& codec = model.codec();
  const Geometry g = geometry_of(image, o);
  const int levels = hvae.levels();

  ForwardResult out;
  Var x(image.tensor());
  FeaturePyramid features = hvae.bottom_up(x);
  out.stack = hvae.top_down_generate(&features, GenerateMode::posterior, o.phase, noise.posterior,
                                     g.height, g.width);
  out.x_hat = out.stack.reconstruction;
  RateTerms rates = rate_nats(out.stack);

  std::vector<Var> raw;
  std::vector<Tensor> masks;
  for (int l = 0; l < levels; ++l) {
    const LatentLevel& lv = out.stack.levels[l];
    out.plans.push_back(make_plan(l, rates.neg_log_p[l], o));
    SymbolFrame frame;
    frame.r = codec.encode_layer(l, lv.mu, prior_info(lv.prior_mean, lv.prior_std),
                                 out.plans[l], lv.context);
    frame.mask = out.plans[l].mask();
    frame.lengths = out.plans[l].quantized;
    raw.push_back(frame.r);
    masks.push_back(frame.mask);
    out.frames.push_back(std::move(frame));
  }

  if (o.power_scope == PowerScope::per_image) {
    auto normalized = channel::power_normalize(raw, masks, o.channel.power);
    out.report.degenerate_power = normalized.degenerate;
    for (int l = 0; l < levels; ++l) out.frames[l].s = normalized.symbols[l];
  } else {
    for (int l = 0; l < levels; ++l) {
      auto normalized = channel::power_normalize({raw[l]}, {masks[l]}, o.channel.power);
      out.report.degenerate_power = out.report.degenerate_power || normalized.degenerate;
      out.frames[l].s = normalized.symbols.front();
    }
  }

  const double sigma_sq = channel::sigma_sq_from_snr(o.channel.snr_db, o.channel.power);
  Var state = hvae.initial_state(g.height, g.width);
  for (int l = 0; l < levels; ++l) {
    SymbolFrame& frame = out.frames[l];
    frame.s_tilde = channel::awgn_transmit(frame.s, frame.mask, sigma_sq, noise.forward);
    Var mu_tilde =
        codec.decode_layer(l, frame.s_tilde, frame.lengths, out.plans[l].options, state);
    state = hvae.absorb(l, state, mu_tilde);
  }
  out.x_hat_h = hvae.render(state);

  Var d_compress = ops::mse(x, out.x_hat);
  Var d_transmit = ops::mse(x, out.x_hat_h);
  Var rate_pp = ops::scale(rates.total, 1.0 / (static_cast<double>(g.height) * g.width));
  out.loss = loss_no_feedback(rate_pp, d_compress, d_transmit, o.lambda, o.alpha);

  auto& b = out.breakdown;
  b.rate_term = rate_pp.value().item();
  b.rate_nats_total = rates.total.value().item();
  b.reported_rate = b.rate_nats_total;
  b.d_compress = d_compress.value().item();
  b.d_transmit = d_transmit.value().item();
  b.total = out.loss.value().item();
  b.lambda = o.lambda;
  b.alpha = o.alpha;
  b.beta = o.beta;

  for (const auto& r : rates.per_level) out.report.rate_nats_per_level.push_back(r.value().item());
  account_rates(out.plans, o, g, out.report);
  out.report.psnr_db = psnr(image.tensor(), out.x_hat_h.value(), g.valid_height, g.valid_width);
  out.report.psnr_compress_db =
      psnr(image.tensor(), out.x_hat.value(), g.valid_height, g.valid_width);
  return out;
}

ForwardResult forward_feedback(const HjsccModel& model, const ImageTensor& image,
                               const ForwardOptions& o, NoiseStreams& noise) {
  check_options(model, o);
  const Hvae& hvae = model.hvae();
  const JsccCodec& codec = model.codec();
  const Geometry g = geometry_of(image, o);
  const int levels = hvae.levels();
  const double sigma_sq = channel::sigma_sq_from_snr(o.channel.snr_db, o.channel.power);

  ForwardResult out;
  Var x(image.tensor());
  FeaturePyramid features = hvae.bottom_up(x);
  Var tx_state = hvae.initial_state(g.height, g.width);
  Var rx_state = tx_state;
  Var rate_total;

  for (int l = 0; l < levels; ++l) {
    LatentLevel lv;
    lv.context = tx_state;
    PriorParams prior = hvae.prior(l, tx_state);
    lv.prior_mean = prior.mean;
    lv.prior_std = prior.std;
    lv.mu = hvae.posterior_mean(l, tx_state, features[l]);
    lv.z = posterior_sample(lv.mu, o.phase, noise.posterior);

    // Substitution prior p(z_l | s~_<l): the transmitter state only carries fed-back symbols.
    Var nlp = ops::neg_log_binned_gaussian(lv.z, lv.prior_mean, lv.prior_std, kProbabilityFloor);
    Var level_rate = ops::sum(nlp);
    out.report.rate_nats_per_level.push_back(level_rate.value().item());
    rate_total = rate_total.defined() ? ops::add(rate_total, level_rate) : level_rate;

    out.plans.push_back(make_plan(l, nlp, o));
    SymbolFrame frame;
    frame.r = codec.encode_layer(l, lv.mu, prior_info(lv.prior_mean, lv.prior_std),
                                 out.plans[l], tx_state);
    frame.mask = out.plans[l].mask();
    frame.lengths = out.plans[l].quantized;
    auto normalized = channel::power_normalize({frame.r}, {frame.mask}, o.channel.power);
    out.report.degenerate_power = out.report.degenerate_power || normalized.degenerate;
    frame.s = normalized.symbols.front();
    frame.s_tilde = channel::awgn_transmit(frame.s, frame.mask, sigma_sq, noise.forward);

    Var mu_tilde =
        codec.decode_layer(l, frame.s_tilde, frame.lengths, out.plans[l].options, rx_state);
    rx_state = hvae.absorb(l, rx_state, mu_tilde);

    if (!o.feedback_conditioning) {
      tx_state = hvae.absorb(l, tx_state, lv.z);
    } else if (!o.channel.feedback_snr_db) {
      // Noiseless feedback: the transmitter replica tracks the receiver exactly.
      tx_state = rx_state;
    } else {
      Var fed_back = channel::feedback_link(frame.s_tilde, frame.mask, o.channel, noise.feedback);
      Var mu_replica =
          codec.decode_layer(l, fed_back, frame.lengths, out.plans[l].options, tx_state);
      tx_state = hvae.absorb(l, tx_state, mu_replica);
    }
    out.frames.push_back(std::move(frame));
    out.stack.levels.push_back(std::move(lv));
  }
  out.x_hat_h = hvae.render(rx_state);

  Var d_transmit = ops::mse(x, out.x_hat_h);
  Var rate_pp = ops::scale(rate_total, 1.0 / (static_cast<double>(g.height) * g.width));
  out.loss = loss_feedback(rate_pp, d_transmit, o.lambda, o.beta);

  auto& b = out.breakdown;
  b.rate_term = rate_pp.value().item();
  b.rate_nats_total = rate_total.value().item();
  b.reported_rate = b.rate_nats_total - levels * std::log(o.beta);
  b.d_transmit = d_transmit.value().item();
  b.total = out.loss.value().item();
  b.lambda = o.lambda;
  b.alpha = o.alpha;
  b.beta = o.beta;

  account_rates(out.plans, o, g, out.report);
  out.report.psnr_db = psnr(image.tensor(), out.x_hat_h.value(), g.valid_height, g.valid_width);
  return out;
}

Var channel_log_posterior(const std::vector<SymbolFrame>& frames, double sigma) {
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  Var total;
  for (const auto& f : frames) {
    Var term = ops::sum(ops::mul(ops::gaussian_log_density(f.s_tilde, f.s, sigma), Var(f.mask)));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total.defined() ? total : Var(Tensor::scalar(0.0));
}

}  // namespace hjscc
