#include "hjscc/rate_match.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace hjscc::rate {

OptionSet OptionSet::uniform(int channels, int index_bits) {
  if (channels <= 0 || channels % 2 != 0) {
    throw ConfigError("option set needs a positive even channel count");
  }
  if (index_bits <= 0 || index_bits > 16) throw ConfigError("index_bits must lie in [1, 16]");
  const long limit = 1L << index_bits;
  for (int step = 2;; step += 2) {
    OptionSet set;
    set.index_bits = index_bits;
    for (int v = 0; v < channels; v += step) set.values.push_back(v);
    set.values.push_back(channels);
    if (static_cast<long>(set.values.size()) <= limit) return set;
  }
}

int OptionSet::max() const {
  if (values.empty()) throw ConfigError("empty option set");
  return values.back();
}

bool OptionSet::contains(int length) const {
  return std::binary_search(values.begin(), values.end(), length);
}

Tensor lengths_from_prior(const Tensor& neg_log_p, double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
  const Shape s = neg_log_p.shape();
  Tensor out(Shape{1, s.h, s.w});
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int c = 0; c < s.c; ++c) {
    for (std::size_t o = 0; o < plane; ++o) {
      const double v = neg_log_p[c * plane + o];
      if (std::isnan(v)) throw NonFiniteError("NaN -log p entry");
      if (v < 0.0) throw std::domain_error("negative -log p entry");
      out[o] += v;
    }
  }
  for (auto& v : out.vec()) v *= alpha;
  return out;
}

int group_count(int height, int width, Patch patch) {
  if (patch.h <= 0 || patch.w <= 0) throw ConfigError("patch dimensions must be positive");
  return ((height + patch.h - 1) / patch.h) * ((width + patch.w - 1) / patch.w);
}

Tensor group_lengths(const Tensor& real_lengths, Patch patch) {
  if (patch.h <= 0 || patch.w <= 0) throw ConfigError("patch dimensions must be positive");
  const Shape s = real_lengths.shape();
  if (s.c != 1) throw ContractError("group_lengths expects a (1, H, W) map");
  Tensor out(s);
  for (int y0 = 0; y0 < s.h; y0 += patch.h) {
    for (int x0 = 0; x0 < s.w; x0 += patch.w) {
      const int y1 = std::min(y0 + patch.h, s.h);
      const int x1 = std::min(x0 + patch.w, s.w);
      double acc = 0.0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) acc += real_lengths.at(0, y, x);
      const double m = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) out.at(0, y, x) = m;
    }
  }
  return out;
}

int quantize_length(double k, const OptionSet& options, int channels) {
  if (options.values.empty()) throw ConfigError("empty option set");
  if (options.max() > channels) throw ContractError("option set exceeds the channel count");
  if (std::isnan(k)) throw NonFiniteError("NaN length");
  if (k < 0.0) throw std::domain_error("length must be non-negative");
  auto it = std::lower_bound(options.values.begin(), options.values.end(), k,
                             [](int q, double key) { return static_cast<double>(q) < key; });
  return it == options.values.end() ? options.values.back() : *it;
}

std::vector<std::uint8_t> make_mask(int k_hat, int channels) {
  if (k_hat < 0 || k_hat > channels) {
    throw ContractError("mask length " + std::to_string(k_hat) + " outside [0, " +
                        std::to_string(channels) + "]");
  }
  std::vector<std::uint8_t> m(channels, 0);
  std::fill_n(m.begin(), k_hat, std::uint8_t{1});
  return m;
}

Tensor mask_from_lengths(const std::vector<int>& lengths, Shape shape) {
  const std::size_t plane = static_cast<std::size_t>(shape.h) * shape.w;
  if (lengths.size() != plane) throw ContractError("length map does not match latent shape");
  Tensor mask(shape);
  for (std::size_t o = 0; o < plane; ++o) {
    const auto column = make_mask(lengths[o], shape.c);
    for (int c = 0; c < shape.c; ++c) mask[c * plane + o] = column[c];
  }
  return mask;
}

Tensor apply_mask(const Tensor& r, const Tensor& mask) {
  require_same_shape(r, mask, "apply_mask");
  Tensor out(r.shape());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] * mask[i];
  return out;
}

double side_info_overhead(long num_groups, int index_bits, double bits_per_symbol) {
  if (!(bits_per_symbol > 0.0)) throw std::domain_error("bits per symbol must be positive");
  return static_cast<double>(num_groups) * index_bits / bits_per_symbol;
}

long LevelRatePlan::payload_reals() const {
  return std::accumulate(quantized.begin(), quantized.end(), 0L);
}

LevelRatePlan plan_level(const Tensor& neg_log_p, double alpha, const OptionSet& options,
                         Patch patch) {
  LevelRatePlan plan;
  plan.shape = neg_log_p.shape();
  plan.patch = patch;
  plan.options = options;
  plan.real_lengths = lengths_from_prior(neg_log_p, alpha);
  plan.merged_lengths = group_lengths(plan.real_lengths, patch);
  plan.quantized.resize(plan.merged_lengths.size());
  for (std::size_t o = 0; o < plan.quantized.size(); ++o) {
    plan.quantized[o] = quantize_length(plan.merged_lengths[o], options, plan.shape.c);
  }
  return plan;
}

LevelRatePlan full_length_plan(Shape shape, const OptionSet& options, Patch patch) {
  if (!options.contains(shape.c)) throw ContractError("option set lacks the full length");
  LevelRatePlan plan;
  plan.shape = shape;
  plan.patch = patch;
  plan.options = options;
  plan.real_lengths = Tensor(Shape{1, shape.h, shape.w}, shape.c);
  plan.merged_lengths = plan.real_lengths;
  plan.quantized.assign(static_cast<std::size_t>(shape.h) * shape.w, shape.c);
  return plan;
}

std::string plans_to_json(const std::vector<LevelRatePlan>& plans) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < plans.size(); ++l) {
    const auto& p = plans[l];
    nlohmann::json rows = nlohmann::json::array();
    for (int y = 0; y < p.shape.h; ++y) {
      rows.push_back(std::vector<int>(p.quantized.begin() + y * p.shape.w,
                                      p.quantized.begin() + (y + 1) * p.shape.w));
    }
    levels.push_back({{"level", l + 1},
                      {"channels", p.shape.c},
                      {"height", p.shape.h},
                      {"width", p.shape.w},
                      {"patch", {p.patch.h, p.patch.w}},
                      {"options", p.options.values},
                      {"index_bits", p.options.index_bits},
                      {"groups", p.groups()},
                      {"payload_reals", p.payload_reals()},
                      {"quantized_lengths", rows}});
  }
  return nlohmann::json{{"levels", levels}}.dump(2);
}

}  // namespace hjscc::rate
