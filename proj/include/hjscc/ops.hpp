#pragma once

#include <vector>

#include "hjscc/tensor.hpp"

// Differentiable primitives over (C, H, W) tensors. Scalars are 1x1x1.
namespace hjscc::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var add_scalar(const Var& a, double k);
/// a * s where s is a 1x1x1 variable.
Var mul_by_scalar(const Var& a, const Var& s);

Var silu(const Var& a);
Var softplus(const Var& a);
/// max(a, floor) elementwise.
Var floor_at(const Var& a, double floor);
/// Clamp to [0, 1]; zero gradient outside.
Var clamp01(const Var& a);
/// Round half away from zero; identity gradient.
Var round_straight_through(const Var& a);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& a, int start, int count);

/// 2-D convolution. weight is (Cout, Cin, k*k), bias is (Cout, 1, 1).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int kernel, int stride, int pad);
Var upsample_nearest(const Var& x, int factor);
/// (C*r*r, H, W) -> (C, H*r, W*r).
Var pixel_shuffle(const Var& x, int factor);
/// (C, 1, 1) -> (C, H, W) by repetition.
Var broadcast_spatial(const Var& v, int height, int width);

Var sum(const Var& a);
Var mean(const Var& a);
Var sum_squares(const Var& a);
Var mse(const Var& a, const Var& b);

/// Elementwise -log of the unit-bin mass of N(mean, std^2) convolved with U(-1/2, 1/2)
/// evaluated at z, with the mass floored at p_floor.
Var neg_log_binned_gaussian(const Var& z, const Var& mean, const Var& std, double p_floor);

/// Elementwise log N(x; mean, sigma^2) with fixed sigma.
Var gaussian_log_density(const Var& x, const Var& mean, double sigma);

/// sqrt(target / s) for a positive 1x1x1 variable s.
Var sqrt_ratio(double target, const Var& s);

}  // namespace hjscc::ops
