#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sforge/error.hpp"

namespace sforge {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream oss;
  oss << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) oss << 'x';
    oss << shape[i];
  }
  oss << ']';
  return oss.str();
}

// Dense row-major float64 array with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage. The autograd
// graph relies on this, since recorded backward rules must write into the
// gradients of the exact tensors that produced an output.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : node_(std::make_shared<Node>()) {
    for (auto d : shape) {
      if (d == 0) fail(ErrorKind::Dimension, "zero-sized dimension in shape ", shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value.assign(shape_size(node_->shape), fill);
  }

  Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<Node>()) {
    if (shape_size(shape) != values.size()) {
      fail(ErrorKind::Dimension, "shape ", shape_str(shape), " holds ", shape_size(shape),
           " values, got ", values.size());
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
  }

  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  // Row/column view of a rank-1 or rank-2 tensor; rank-1 is one row.
  std::size_t rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
  std::size_t cols() const { return node_->shape.back(); }

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }
  std::vector<double>& storage() { return node_->value; }

  double& operator[](std::size_t i) { return node_->value[i]; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return node_->value[r * cols() + c]; }

  double item() const {
    if (size() != 1) fail(ErrorKind::Dimension, "item() on tensor of shape ", shape_str(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  // Marks the tensor as a gradient sink and allocates a zeroed gradient.
  Tensor& set_requires_grad(bool on = true) {
    node_->requires_grad = on;
    if (on && node_->grad.size() != node_->value.size()) node_->grad.assign(node_->value.size(), 0.0);
    if (!on) node_->grad.clear();
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }
  // shallow const, like the handle itself
  std::span<double> grad() const { return node_->grad; }
  void zero_grad() const { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  Tensor clone() const {
    Tensor out(shape(), std::vector<double>(node_->value));
    return out;
  }

  bool same_as(const Tensor& other) const { return node_ == other.node_; }

  bool all_finite() const {
    return std::all_of(node_->value.begin(), node_->value.end(),
                       [](double v) { return std::isfinite(v); });
  }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Node> node_;
};

// Ordered record of differentiable operations. Backward replays the recorded
// rules in exact reverse order, so every rule sees a fully accumulated output
// gradient before it runs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_rule) { rules_.push_back(std::move(backward_rule)); }

  std::size_t size() const { return rules_.size(); }

  void backward(Tensor& loss) {
    if (loss.size() != 1) fail(ErrorKind::Dimension, "backward() needs a scalar loss, got ", shape_str(loss.shape()));
    if (!loss.has_grad()) fail(ErrorKind::Training, "loss is not connected to any trainable tensor");
    loss.grad()[0] += 1.0;
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
    rules_.clear();
  }

  void clear() { rules_.clear(); }

  // Tape that operations on the current thread record into, or nullptr.
  static Tape* active() { return active_slot(); }

  // RAII activation; nests by restoring the previous tape.
  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(active_slot()) { active_slot() = &tape; }
    ~Scope() { active_slot() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording, e.g. for evaluation inside a training loop.
  class Pause {
   public:
    Pause() : previous_(active_slot()) { active_slot() = nullptr; }
    ~Pause() { active_slot() = previous_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  static Tape*& active_slot() {
    thread_local Tape* slot = nullptr;
    return slot;
  }

  std::vector<std::function<void()>> rules_;
};

}  // namespace sforge
