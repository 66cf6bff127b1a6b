#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjscc {

/// Thrown when array shapes, level counts or other structural contracts are violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Thrown for invalid configuration (divisibility, empty option sets, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a NaN reaches an operation that needs an ordered value.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense channel-major (C, H, W) array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

  double item() const;
  double sum() const;
  void fill(double v);

  /// Channels [start, start + count) as a new tensor.
  Tensor channels(int start, int count) const;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{0, 0, 0};
  std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

namespace detail {
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};
}  // namespace detail

/// Handle to a value in the autodiff graph. Copies share the node.
class Var {
 public:
  Var() = default;
  /// Constant (no gradient) unless `requires_grad` is set.
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Accumulated gradient; empty tensor when nothing has flowed here yet.
  const Tensor& grad() const { return node_->grad; }
  void zero_grad();

  /// Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  std::shared_ptr<detail::Node> node() const { return node_; }

  static Var make(Tensor value, std::vector<Var> inputs,
                  std::function<void(detail::Node&)> backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar root; gradients accumulate into leaves.
void backward(const Var& root);

/// While alive, new ops record no backward closures.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace hjscc
