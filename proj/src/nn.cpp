#include "hjscc/nn.hpp"

#include <cmath>

namespace hjscc::nn {

Var ParamStore::create(const std::string& name, Tensor init) {
  if (params_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  Var v(std::move(init), true);
  params_.emplace(name, v);
  order_.push_back(name);
  return v;
}

Var& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Var& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::vector<Var> ParamStore::all() const {
  std::vector<Var> out;
  out.reserve(order_.size());
  for (const auto& n : order_) out.push_back(params_.at(n));
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

Tensor Initializer::uniform(const std::string& name, Shape shape, double bound) const {
  Tensor t(shape);
  if (bound == 0.0) return t;
  std::uint64_t key = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) key = (key ^ c) * 0x100000001b3ULL;
  std::seed_seq seq{seed_, seed_ >> 32, key, key >> 32};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

Conv2d::Conv2d(ParamStore& store, Initializer& init, const std::string& name, int in_channels,
               int out_channels, int kernel, int stride, double gain)
    : kernel_(kernel), stride_(stride), out_channels_(out_channels) {
  const double fan_in = static_cast<double>(in_channels * kernel * kernel);
  // Variance-preserving (LeCun) uniform bound.
  const double bound = gain * std::sqrt(3.0 / fan_in);
  weight_ = store.create(name + ".weight",
                         init.uniform(name + ".weight", Shape{out_channels, in_channels, kernel * kernel}, bound));
  bias_ = store.create(name + ".bias", Tensor(Shape{out_channels, 1, 1}, 0.0));
}

Var Conv2d::operator()(const Var& x) const {
  // Strided layers are non-overlapping patch merges; odd kernels keep the size.
  const int pad = stride_ == 1 ? kernel_ / 2 : 0;
  return ops::conv2d(x, weight_, bias_, kernel_, stride_, pad);
}

ResBlock::ResBlock(ParamStore& store, Initializer& init, const std::string& name, int channels)
    : first_(store, init, name + ".conv1", channels, channels, 3),
      second_(store, init, name + ".conv2", channels, channels, 3, 1, 0.1) {}

Var ResBlock::operator()(const Var& x) const {
  return ops::add(x, second_(ops::silu(first_(ops::silu(x)))));
}

ResStack::ResStack(ParamStore& store, Initializer& init, const std::string& name, int channels,
                   int depth) {
  for (int i = 0; i < depth; ++i) {
    blocks_.emplace_back(store, init, name + ".block" + std::to_string(i), channels);
  }
}

Var ResStack::operator()(Var x) const {
  for (const auto& b : blocks_) x = b(x);
  return x;
}

}  // namespace hjscc::nn
