#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hjscc/tensor.hpp"

namespace hjscc::testing {

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.vec()) v = u(rng);
  return t;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.vec() == b.vec();
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Worst relative error between autodiff and central differences of a scalar function of
/// several leaf variables, over every element.
inline double gradient_error(const std::function<Var(const std::vector<Var>&)>& f,
                             std::vector<Tensor> inputs, double step = 1e-5) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.emplace_back(t, true);
  backward(f(leaves));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = leaves[k].grad().empty() ? Tensor(inputs[k].shape()) : leaves[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t[i] += delta;
          probe.emplace_back(t);
        }
        return f(probe).value().item();
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      const double err = std::abs(numeric - analytic[i]) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace hjscc::testing
