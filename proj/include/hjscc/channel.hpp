#pragma once

#include <optional>
#include <random>
#include <vector>

#include "hjscc/tensor.hpp"

namespace hjscc::channel {

struct ChannelSpec {
  double snr_db = 10.0;
  double power = 1.0;
  /// Feedback link SNR; empty means a noiseless feedback link.
  std::optional<double> feedback_snr_db;

  void validate() const;
};

/// sigma^2 = P * 10^(-snr_db / 10).
double sigma_sq_from_snr(double snr_db, double power);

/// Shannon capacity log2(1 + SNR) of a complex AWGN channel use, in bits.
double capacity_bits_per_symbol(double snr_db);

struct NormalizedSymbols {
  std::vector<Var> symbols;
  double scale = 1.0;
  /// Set when no unmasked energy exists; symbols are returned unchanged.
  bool degenerate = false;
};

/// Jointly rescales all streams so that the mean square over unmasked reals equals P.
/// Masked entries are forced to zero.
NormalizedSymbols power_normalize(const std::vector<Var>& symbols,
                                  const std::vector<Tensor>& masks, double power);

/// Single-stream convenience over plain tensors.
Tensor power_normalize(const Tensor& s, const Tensor& mask, double power,
                       bool* degenerate = nullptr);

/// s + n on unmasked entries, n ~ N(0, sigma_sq) per real dimension; masked entries stay 0.
Var awgn_transmit(const Var& s, const Tensor& mask, double sigma_sq, std::mt19937_64& rng);

/// Return link carrying received symbols back to the transmitter.
Var feedback_link(const Var& s_tilde, const Tensor& mask, const ChannelSpec& spec,
                  std::mt19937_64& rng);

/// K / (3 H W).
double compute_cbr(double complex_symbols, int height, int width);

}  // namespace hjscc::channel
