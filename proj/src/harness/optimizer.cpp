#include "hjscc/harness/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace hjscc::harness {

Adam::Adam(nn::ParamStore& store, double beta1, double beta2, double eps)
    : store_(store), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store_.all()) {
    state_.first.emplace_back(p.shape(), 0.0);
    state_.second.emplace_back(p.shape(), 0.0);
  }
}

double Adam::clip_gradients(double max_norm) {
  double sq = 0.0;
  for (const auto& p : store_.all()) {
    for (double g : p.grad().vec()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double k = max_norm / norm;
    for (auto p : store_.all()) {
      auto node = p.node();
      for (double& g : node->grad.vec()) g *= k;
    }
  }
  return norm;
}

void Adam::step(double learning_rate) {
  ++state_.step;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(state_.step));
  auto params = store_.all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& g = params[k].grad();
    if (g.empty()) continue;
    Tensor& w = params[k].mutable_value();
    Tensor& m = state_.first[k];
    Tensor& v = state_.second[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::set_state(AdamState state) {
  if (state.first.size() != state_.first.size() || state.second.size() != state_.second.size()) {
    throw ContractError("optimizer state does not match the parameter store");
  }
  for (std::size_t k = 0; k < state.first.size(); ++k) {
    require_same_shape(state.first[k], state_.first[k], "optimizer state");
    require_same_shape(state.second[k], state_.second[k], "optimizer state");
  }
  state_ = std::move(state);
}

double cosine_learning_rate(double base_lr, long step, long total_steps, long warmup_steps,
                            double floor_ratio) {
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const long span = std::max(1L, total_steps - warmup_steps);
  const double t = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  return base_lr * (floor_ratio + (1.0 - floor_ratio) * cosine);
}

}  // namespace hjscc::harness
