// SPDX-License-Identifier: Apache-2.0
//
// Dense rank<=3 tensors of doubles and the reverse-mode tape that records
// operations on them.
//
// A Tensor is a handle: copies share the same storage and gradient. This is
// what lets a parameter appear in many places of one computation and collect
// a single accumulated gradient.
#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "corpg/error.hpp"

namespace corpg {

struct Shape {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::size_t rank = 0;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> d) {
    if (d.size() > 3) {
      throw DimensionError("tensor rank is limited to 3, got " + std::to_string(d.size()));
    }
    for (std::size_t v : d) {
      dims[rank++] = v;
    }
  }

  static Shape matrix(std::size_t r, std::size_t c) { return Shape{r, c}; }

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) {
      n *= dims[i];
    }
    return n;
  }

  // 2-D view: leading dims collapse into rows, a vector is one row.
  std::size_t rows() const {
    if (rank == 0) return 1;
    if (rank == 1) return 1;
    if (rank == 2) return dims[0];
    return dims[0] * dims[1];
  }
  std::size_t cols() const { return rank == 0 ? 1 : dims[rank - 1]; }

  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (std::size_t i = 0; i < rank; ++i) {
      if (dims[i] != o.dims[i]) return false;
    }
    return true;
  }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < rank; ++i) {
      if (i) os << 'x';
      os << dims[i];
    }
    os << ']';
    return os.str();
  }
};

class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something accumulates into it
    bool requires_grad = false;
  };

  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : node_(std::make_shared<Node>()) {
    node_->shape = shape;
    node_->value.assign(shape.numel(), fill);
  }

  Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<Node>()) {
    if (values.size() != shape.numel()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape.str());
    }
    node_->shape = shape;
    node_->value = std::move(values);
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values) {
    return Tensor(Shape{r, c}, std::move(values));
  }

  static Tensor parameter(Shape shape, std::vector<double> values) {
    Tensor t(shape, std::move(values));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows(); }
  std::size_t cols() const { return node_->shape.cols(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }

  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const {
    if (numel() != 1) {
      throw DimensionError("item() on tensor of shape " + shape().str());
    }
    return node_->value[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty() || node_->value.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    if (node_->grad.size() != node_->value.size()) {
      node_->grad.assign(node_->value.size(), 0.0);
    }
    return node_->grad;
  }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  // Fresh storage, no gradient tracking.
  Tensor clone() const { return Tensor(shape(), node_->value); }

  const std::shared_ptr<Node>& handle() const { return node_; }
  bool same_storage(const Tensor& o) const { return node_ == o.node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of executed differentiable operations. Operations record
// themselves on the tape that is active on the current thread (see Scope);
// with no active tape nothing is recorded.
class Tape {
 public:
  using Backward = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape() {
    if (current() == this) current() = nullptr;
  }

  void record(std::vector<std::shared_ptr<Tensor::Node>> nodes, Backward fn) {
    entries_.push_back(Entry{std::move(nodes), std::move(fn)});
  }

  // Seeds d(root)/d(root) = 1 and replays entries in reverse execution order.
  void backward(const Tensor& root) {
    if (!root.requires_grad()) return;
    auto& g = root.handle()->grad;
    g.assign(root.numel(), 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      it->fn();
    }
  }

  // Zeroes the gradient of every tensor the tape touched, then forgets them.
  void clear() {
    for (auto& e : entries_) {
      for (auto& n : e.nodes) {
        std::fill(n->grad.begin(), n->grad.end(), 0.0);
      }
    }
    entries_.clear();
  }

  std::size_t size() const { return entries_.size(); }

  static Tape* active() { return current(); }

  // RAII activation of a tape on this thread; nests.
  class Scope {
   public:
    explicit Scope(Tape& t) : previous_(current()) { current() = &t; }
    ~Scope() { current() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  // Suspends recording on this thread for its lifetime.
  class Pause {
   public:
    Pause() : previous_(current()) { current() = nullptr; }
    ~Pause() { current() = previous_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  struct Entry {
    std::vector<std::shared_ptr<Tensor::Node>> nodes;
    Backward fn;
  };

  static Tape*& current() {
    thread_local Tape* tape = nullptr;
    return tape;
  }

  std::vector<Entry> entries_;
};

}  // namespace corpg
