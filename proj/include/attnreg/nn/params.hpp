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

#include <deque>
#include <random>
#include <string>
#include <vector>

#include "attnreg/nn/autograd.hpp"
#include "attnreg/nn/ops.hpp"

namespace attnreg::nn {

/// Named trainable tensors plus non-trainable batch-norm statistics, in
/// registration order. Modules keep handles into the store, so it is pinned.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
  };
  struct StateEntry {
    std::string name;
    BatchNormState<T> state;
  };

  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Var<T> add(const std::string& name, Tensor<T> init);
  BatchNormState<T>& add_batch_norm_state(const std::string& name, std::int64_t channels);

  const std::vector<Entry>& params() const { return params_; }
  std::deque<StateEntry>& states() { return states_; }
  const std::deque<StateEntry>& states() const { return states_; }

  /// Null Var when absent.
  Var<T> find(const std::string& name) const;
  std::int64_t scalar_count() const;
  void zero_grad();
  bool all_finite() const;

 private:
  std::vector<Entry> params_;
  std::deque<StateEntry> states_;
};

/// Seeded parameter initialization.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor<T> normal(Shape shape, double stddev);
  Tensor<T> uniform(Shape shape, double bound);
  /// He-normal for a 3x3x3 kernel [out, in, 3, 3, 3] followed by LeakyReLU(slope).
  Tensor<T> conv_kaiming(std::int64_t out, std::int64_t in, double slope);
  /// Glorot-uniform for a [in, out] matrix.
  Tensor<T> xavier(std::int64_t in, std::int64_t out);

 private:
  std::mt19937_64 rng_;
};

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters that received no gradient in a step
/// are left untouched.
template <typename T>
class Adam {
 public:
  Adam(const ParamStore<T>& store, AdamOptions options);

  void step();

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }
  const AdamOptions& options() const { return options_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

 private:
  const ParamStore<T>& store_;
  AdamOptions options_;
  std::int64_t step_count_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

}  // namespace attnreg::nn
