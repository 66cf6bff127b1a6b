#include "hjscc/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace hjscc {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return "(" + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ContractError("tensor data size " + std::to_string(data_.size()) +
                        " does not match shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::channels(int start, int count) const {
  if (start < 0 || count < 0 || start + count > shape_.c) {
    throw ContractError("channel slice out of range for " + shape_.str());
  }
  const std::size_t plane = static_cast<std::size_t>(shape_.h) * shape_.w;
  Tensor out(Shape{count, shape_.h, shape_.w});
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(start * plane), count * plane,
              out.data_.begin());
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw ContractError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                        b.shape().str());
  }
}

Tensor& detail::Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
}

Var Var::make(Tensor value, std::vector<Var> inputs,
              std::function<void(detail::Node&)> backward) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs.reserve(inputs.size());
  for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
  out.node_->backward = std::move(backward);
  return out;
}

void backward(const Var& root) {
  if (!root.requires_grad()) return;
  if (root.value().size() != 1) throw ContractError("backward() needs a scalar root");

  // Iterative post-order DFS for a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && child->backward && !seen.contains(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->grad.empty()) continue;
    node->backward(*node);
    // Interior gradients are not needed after propagation.
    if (node != root.node().get()) node->grad = Tensor();
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace hjscc
