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

#include "attnreg/nn/params.hpp"

#include <cmath>

#include "attnreg/error.hpp"

namespace attnreg::nn {

template <typename T>
Var<T> ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (find(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  Var<T> v(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

template <typename T>
BatchNormState<T>& ParamStore<T>::add_batch_norm_state(const std::string& name, std::int64_t channels) {
  states_.push_back({name, {Tensor<T>({channels}, T(0)), Tensor<T>({channels}, T(1))}});
  return states_.back().state;
}

template <typename T>
Var<T> ParamStore<T>::find(const std::string& name) const {
  for (const auto& e : params_) {
    if (e.name == name) return e.var;
  }
  return {};
}

template <typename T>
std::int64_t ParamStore<T>::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& e : params_) n += e.var.value().size();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : params_) e.var.zero_grad();
}

template <typename T>
bool ParamStore<T>::all_finite() const {
  for (const auto& e : params_) {
    if (!e.var.value().all_finite()) return false;
  }
  return true;
}

template <typename T>
Tensor<T> Initializer<T>::normal(Shape shape, double stddev) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.span()) v = static_cast<T>(dist(rng_));
  return t;
}

template <typename T>
Tensor<T> Initializer<T>::uniform(Shape shape, double bound) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.span()) v = static_cast<T>(dist(rng_));
  return t;
}

template <typename T>
Tensor<T> Initializer<T>::conv_kaiming(std::int64_t out, std::int64_t in, double slope) {
  const double fan_in = static_cast<double>(in * 27);
  return normal({out, in, 3, 3, 3}, std::sqrt(2.0 / ((1.0 + slope * slope) * fan_in)));
}

template <typename T>
Tensor<T> Initializer<T>::xavier(std::int64_t in, std::int64_t out) {
  return uniform({in, out}, std::sqrt(6.0 / static_cast<double>(in + out)));
}

template <typename T>
Adam<T>::Adam(const ParamStore<T>& store, AdamOptions options) : store_(store), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  for (const auto& e : store_.params()) {
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(options_.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(options_.beta2, t)));
  const T lr = static_cast<T>(options_.learning_rate);
  const T eps = static_cast<T>(options_.eps);
  const auto& params = store_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var<T> p = params[i].var;
    if (!p.has_grad()) continue;
    const T* g = p.grad().data();
    T* w = p.mutable_value().data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::int64_t n = p.value().size();
    for (std::int64_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] * c1) / (std::sqrt(v[j] * c2) + eps);
    }
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Initializer<float>;
template class Initializer<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace attnreg::nn
