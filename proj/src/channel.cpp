#include "hjscc/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "hjscc/ops.hpp"

namespace hjscc::channel {

void ChannelSpec::validate() const {
  if (!(power > 0.0)) throw ConfigError("channel power must be positive");
}

double sigma_sq_from_snr(double snr_db, double power) {
  if (!(power > 0.0)) throw std::domain_error("power must be positive");
  return power * std::pow(10.0, -snr_db / 10.0);
}

double capacity_bits_per_symbol(double snr_db) {
  return std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

NormalizedSymbols power_normalize(const std::vector<Var>& symbols,
                                  const std::vector<Tensor>& masks, double power) {
  if (symbols.size() != masks.size()) throw ContractError("one mask per symbol stream required");
  if (!(power > 0.0)) throw std::domain_error("power must be positive");
  NormalizedSymbols out;
  std::vector<Var> masked;
  double count = 0.0;
  Var energy;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    require_same_shape(symbols[i].value(), masks[i], "power_normalize");
    Var m = ops::mul(symbols[i], Var(masks[i]));
    count += masks[i].sum();
    Var e = ops::sum_squares(m);
    energy = energy.defined() ? ops::add(energy, e) : e;
    masked.push_back(m);
  }
  if (count == 0.0 || !energy.defined() || !(energy.value().item() > 0.0)) {
    out.symbols = symbols;
    out.degenerate = true;
    return out;
  }
  Var factor = ops::sqrt_ratio(power * count, energy);
  out.scale = factor.value().item();
  for (auto& m : masked) out.symbols.push_back(ops::mul_by_scalar(m, factor));
  return out;
}

Tensor power_normalize(const Tensor& s, const Tensor& mask, double power, bool* degenerate) {
  NoGradGuard guard;
  auto result = power_normalize(std::vector<Var>{Var(s)}, std::vector<Tensor>{mask}, power);
  if (degenerate != nullptr) *degenerate = result.degenerate;
  return result.symbols.front().value();
}

Var awgn_transmit(const Var& s, const Tensor& mask, double sigma_sq, std::mt19937_64& rng) {
  if (sigma_sq < 0.0) throw std::domain_error("noise variance must be non-negative");
  require_same_shape(s.value(), mask, "awgn_transmit");
  Tensor noise(s.shape());
  if (sigma_sq > 0.0) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(sigma_sq));
    for (std::size_t i = 0; i < noise.size(); ++i) {
      if (mask[i] != 0.0) noise[i] = gauss(rng);
    }
  }
  // Untransmitted slots carry nothing, not even noise.
  return ops::mul(ops::add(s, Var(std::move(noise))), Var(mask));
}

Var feedback_link(const Var& s_tilde, const Tensor& mask, const ChannelSpec& spec,
                  std::mt19937_64& rng) {
  if (!spec.feedback_snr_db) return s_tilde;
  return awgn_transmit(s_tilde, mask, sigma_sq_from_snr(*spec.feedback_snr_db, spec.power), rng);
}

double compute_cbr(double complex_symbols, int height, int width) {
  if (height <= 0 || width <= 0) throw ContractError("image dimensions must be positive");
  return complex_symbols / (3.0 * height * width);
}

}  // namespace hjscc::channel
