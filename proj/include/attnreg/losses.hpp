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

#include "attnreg/field_ops.hpp"
#include "attnreg/nn/autograd.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

/// Weights of the training objective and the similarity window.
struct LossWeights {
  double lambda_a = 0.3;       // affine similarity
  double lambda_d = 0.7;       // deformable similarity
  double lambda_smooth = 0.001;
  double lambda_a_seg = 0.01;
  double lambda_d_seg = 0.1;
  int window = 9;
  double epsilon = 1e-5;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossParts {
  double l_a = 0.0;
  double l_d = 0.0;
  double l_smooth = 0.0;
  double l_a_seg = 0.0;
  double l_d_seg = 0.0;
};

struct LossBreakdown {
  double l_a = 0.0;
  double l_d = 0.0;
  double l_smooth = 0.0;
  double l_a_seg = 0.0;
  double l_d_seg = 0.0;
  double total = 0.0;
};

/// Squared local normalized cross-correlation averaged over voxels, in [0, 1]. Windows are
/// clipped at the border: local means use only the voxels inside the volume.
double lncc(const Volume& f, const Volume& w, int window = 9, double eps = 1e-5);

/// (-lncc(f, m_a), -lncc(f, m_d)).
std::pair<double, double> similarity_losses(const Volume& f, const Volume& m_a, const Volume& m_d,
                                            int window = 9, double eps = 1e-5);

/// Diffusion regularizer on forward differences of a displacement.
double smoothness(const VectorField& u);

/// 1 - soft Dice between a binary fixed mask and a soft warped mask.
double soft_dice_loss(const SegMask& f_seg, const Volume& w_seg, double eps = 1e-5);

/// Weighted objective. Segmentation terms are dropped when masks are absent.
/// Throws NumericError naming the first non-finite part.
LossBreakdown total_loss(const LossParts& parts, const LossWeights& weights, bool masks_available);

namespace losses {

// Differentiable batch versions over [N, C, nz, ny, nx] tensors; each returns
// the mean over the batch as a scalar.

template <typename T>
nn::Var<T> lncc(const nn::Var<T>& f, const nn::Var<T>& w, int window, T eps);

template <typename T>
nn::Var<T> smoothness(const nn::Var<T>& u);

template <typename T>
nn::Var<T> soft_dice_loss(const nn::Var<T>& f_seg, const nn::Var<T>& w_seg, T eps);

template <typename T>
struct Objective {
  nn::Var<T> l_a, l_d, l_smooth, l_a_seg, l_d_seg;
  nn::Var<T> total;
  LossBreakdown breakdown;  // component values with total recombined in double
};

/// Builds the weighted objective; seg terms may be null when masks are absent.
template <typename T>
Objective<T> objective(nn::Var<T> l_a, nn::Var<T> l_d, nn::Var<T> l_smooth, nn::Var<T> l_a_seg,
                       nn::Var<T> l_d_seg, const LossWeights& weights, bool masks_available);

}  // namespace losses

}  // namespace attnreg
