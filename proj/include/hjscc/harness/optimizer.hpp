#pragma once

#include <vector>

#include "hjscc/nn.hpp"

namespace hjscc::harness {

struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  long step = 0;
};

/// Adam over a ParamStore, parameters addressed in store order.
class Adam {
 public:
  Adam(nn::ParamStore& store, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Rescales gradients so their global L2 norm is at most max_norm; returns the pre-clip norm.
  double clip_gradients(double max_norm);
  void step(double learning_rate);

  const AdamState& state() const { return state_; }
  void set_state(AdamState state);

 private:
  nn::ParamStore& store_;
  double beta1_;
  double beta2_;
  double eps_;
  AdamState state_;
};

/// Linear warmup followed by cosine decay from base_lr to base_lr * floor_ratio.
double cosine_learning_rate(double base_lr, long step, long total_steps, long warmup_steps,
                            double floor_ratio);

}  // namespace hjscc::harness
