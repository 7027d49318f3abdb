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

// Differentiable tensor operations. Spatial tensors are laid out as
// [N, C, nz, ny, nx] so x varies fastest; token tensors as [B, L, k].

#include <span>
#include <vector>

#include "attnreg/dims.hpp"
#include "attnreg/nn/autograd.hpp"

namespace attnreg::nn {

// ---- elementwise and structural -------------------------------------------

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);

/// Scalar sum / mean of all elements, shape [1].
template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

/// sum_i weights[i] * terms[i] over scalar terms; null terms are skipped.
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights);

template <typename T> Var<T> reshape(const Var<T>& a, Shape s);
template <typename T> Var<T> concat(const std::vector<Var<T>>& xs, int axis);
template <typename T> Var<T> slice(const Var<T>& a, int axis, std::int64_t start, std::int64_t len);

/// [B, M, N] -> [B, N, M].
template <typename T> Var<T> transpose_last2(const Var<T>& a);

// ---- activations ------------------------------------------------------------

template <typename T> Var<T> leaky_relu(const Var<T>& a, T slope);
/// Exact (erf-based) Gaussian error linear unit.
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);

// ---- dense layers -----------------------------------------------------------

/// x[..., in] * w[in, out] + b[out]; b may be empty.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

/// Normalizes over the last axis.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

/// y[b, l, :] = x[b, l, :] + table[row_offset + l, :].
template <typename T>
Var<T> add_position(const Var<T>& x, const Var<T>& table, std::int64_t row_offset);

/// Collects attention probabilities [B, heads, L, L] when attached to a forward pass.
template <typename T>
struct AttentionProbe {
  std::vector<Tensor<T>> probabilities;
};

/// Multi-head scaled dot-product attention over q, k, v of shape [B, L, D].
/// Each head uses a contiguous D / heads slice of the channels.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads, T scale,
                 AttentionProbe<T>* probe = nullptr);

// ---- volumetric layers ------------------------------------------------------

/// 3x3x3 convolution with padding 1; output extent is ceil(n / stride).
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride);

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
};

/// Per-channel normalization. With use_batch_stats the running estimates are
/// updated with `momentum`; otherwise they are used as the statistics.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormState<T>& state, bool use_batch_stats, T momentum, T eps);

template <typename T> Var<T> upsample_nearest(const Var<T>& x, Dims target);

/// [N, C, ...] -> [N, C].
template <typename T> Var<T> global_avg_pool(const Var<T>& x);

// ---- field operations -------------------------------------------------------

/// Trilinear, border-clamped warp of img [N, C, ...] by disp [N, 3, ...].
template <typename T> Var<T> warp(const Var<T>& img, const Var<T>& disp);

/// params [N, 12] -> displacement [N, 3, nz, ny, nx].
template <typename T> Var<T> affine_displacement(const Var<T>& params, Dims dims);

/// Displacement of (id + u1) o (id + u2).
template <typename T> Var<T> compose(const Var<T>& u1, const Var<T>& u2);

/// Scaling-and-squaring exponential of a stationary velocity field.
template <typename T> Var<T> exponentiate(const Var<T>& v, int steps);

/// Spatial extent of a [N, C, nz, ny, nx] tensor.
inline Dims spatial_dims(const Shape& s) {
  return Dims{static_cast<int>(s[4]), static_cast<int>(s[3]), static_cast<int>(s[2])};
}

}  // namespace attnreg::nn
