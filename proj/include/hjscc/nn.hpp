#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hjscc/ops.hpp"

namespace hjscc::nn {

/// Named trainable arrays, iterated in insertion order.
class ParamStore {
 public:
  Var create(const std::string& name, Tensor init);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::string>& names() const { return order_; }
  Var& get(const std::string& name);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  std::vector<Var> all() const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  std::map<std::string, Var> params_;
  std::vector<std::string> order_;
};

/// Deterministic initializer; each parameter draws from a stream keyed by its name.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : seed_(seed) {}
  Tensor uniform(const std::string& name, Shape shape, double bound) const;

 private:
  std::uint64_t seed_;
};

class Conv2d {
 public:
  Conv2d() = default;
  /// `gain` scales the default fan-in bound; zero gives a zero-initialized layer.
  Conv2d(ParamStore& store, Initializer& init, const std::string& name, int in_channels,
         int out_channels, int kernel, int stride = 1, double gain = 1.0);

  Var operator()(const Var& x) const;
  int out_channels() const { return out_channels_; }

 private:
  Var weight_;
  Var bias_;
  int kernel_ = 1;
  int stride_ = 1;
  int out_channels_ = 0;
};

/// x + conv(silu(conv(silu(x)))), 3x3 kernels; the second conv starts small.
class ResBlock {
 public:
  ResBlock() = default;
  ResBlock(ParamStore& store, Initializer& init, const std::string& name, int channels);
  Var operator()(const Var& x) const;

 private:
  Conv2d first_;
  Conv2d second_;
};

class ResStack {
 public:
  ResStack() = default;
  ResStack(ParamStore& store, Initializer& init, const std::string& name, int channels, int depth);
  Var operator()(Var x) const;

 private:
  std::vector<ResBlock> blocks_;
};

}  // namespace hjscc::nn
