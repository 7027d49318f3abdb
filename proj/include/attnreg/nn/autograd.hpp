// Copyright 2026 The attnreg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Minimal reverse-mode automatic differentiation. Every op returns a Var
// holding its value and, when any input requires a gradient, a closure that
// pushes the output gradient back to its parents. Graphs are released when
// the last Var referencing them goes out of scope.

#include <functional>
#include <memory>
#include <vector>

#include "attnreg/nn/tensor.hpp"

namespace attnreg::nn {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-filled on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  explicit operator bool() const { return static_cast<bool>(node_); }

  const Tensor<T>& value() const { return node_->value; }
  /// Direct access for optimizers and tests; invalidates nothing downstream.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool enabled();

 private:
  bool previous_;
};

/// Builds an op result. The closure is only kept when recording is enabled
/// and some parent requires a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward);

/// Runs reverse accumulation from a scalar root, seeding d(root)/d(root) = 1.
template <typename T>
void backward(const Var<T>& root);

/// Accumulates `g` into the parent's gradient when it participates.
template <typename T>
inline Tensor<T>* grad_of(Node<T>& self, std::size_t parent) {
  auto& p = self.parents[parent];
  return p && p->requires_grad ? &p->grad_buffer() : nullptr;
}

}  // namespace attnreg::nn
