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

#include "attnreg/nn/autograd.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "attnreg/error.hpp"

namespace attnreg::nn {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) out << (i ? "," : "") << s[i];
  out << ']';
  return out.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ValidationError("tensor shape " + shape_str(shape_) + " does not match " +
                          std::to_string(data_.size()) + " values");
  }
}

template <typename T>
void Tensor<T>::reshape(Shape s) {
  if (numel(s) != size()) {
    throw ValidationError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
  }
  shape_ = std::move(s);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& o) {
  if (o.size() != size()) {
    throw ValidationError("tensor size mismatch in += : " + shape_str(shape_) + " vs " +
                          shape_str(o.shape()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class Tensor<float>;
template class Tensor<double>;

namespace {
thread_local bool g_no_grad = false;
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::enabled() { return g_no_grad; }

template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (!g_no_grad) {
    bool any = false;
    for (const auto& p : parents) any = any || (p && p.requires_grad());
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p ? p.node() : nullptr);
      node->backward = std::move(backward_fn);
    }
  }
  return Var<T>(std::move(node));
}

template <typename T>
void backward(const Var<T>& root) {
  if (!root.requires_grad()) return;
  if (root.value().size() != 1) throw ValidationError("backward needs a scalar root");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p && p->requires_grad && p->backward && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->grad.empty() || !node->backward) continue;
    node->backward(*node);
    // Interior gradients are no longer needed once propagated.
    if (node != root.node().get()) node->grad = Tensor<T>();
  }
}

template Var<float> make_result(Tensor<float>, std::vector<Var<float>>,
                                std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, std::vector<Var<double>>,
                                 std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace attnreg::nn
