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

#include <optional>
#include <string>

#include "attnreg/field_ops.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

/// Overlap of a warped mask (prediction) against the fixed mask (truth).
struct Overlap {
  double dice = 0.0;
  double prec = 0.0;
  double rec = 0.0;
  bool empty_denominator = false;  // some ratio had nothing to divide by and was set to 0
};

Overlap overlap_metrics(const SegMask& f_seg, const SegMask& w_seg);

/// Set voxels with an unset 6-neighbour or lying on the volume boundary.
SegMask surface(const SegMask& m);

/// Average symmetric surface distance in mm using exact distance transforms.
double assd(const SegMask& a, const SegMask& b, const Spacing& spacing);

/// Squared Euclidean distance (mm^2) from every voxel to the nearest set voxel of `sites`.
std::vector<double> squared_distance_transform(const SegMask& sites, const Spacing& spacing);

enum class Stage { initial, affine, final };

std::string stage_name(Stage s);

/// Transform chain applied to the moving mask: nothing, an affine, or an affine then φ.
struct TransformChain {
  std::optional<AffineParams> affine;
  std::optional<VectorField> phi;
};

struct EvalReport {
  Stage stage = Stage::initial;
  double dice = 0.0;
  double prec = 0.0;
  double rec = 0.0;
  double assd_mm = 0.0;
  std::optional<JacobianStats> jac;  // final stage only
};

/// Warps m_seg through the chain (nearest neighbour) and scores it against f_seg.
EvalReport evaluate_stage(const SegMask& f_seg, const SegMask& m_seg, const TransformChain& chain, Stage stage);

/// Single displacement equivalent to the chain, or nullopt for an empty chain.
std::optional<VectorField> chain_displacement(const TransformChain& chain, Dims dims);

}  // namespace attnreg
