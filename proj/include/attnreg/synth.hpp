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

#include <cstdint>

#include "attnreg/field_ops.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

/// Controls the synthetic vertebra-like pair generator.
struct SynthConfig {
  double amplitude = 1.0;          // multiplies every random perturbation; 0 gives identical images
  double max_rotation_deg = 15.0;  // per axis, at most 15
  double max_translation = 0.1;    // fraction of the extent per axis, at most 0.1
  double scale_range = 0.08;       // scales drawn from [1 - r, 1 + r], r at most 0.1
  double deform_amplitude = 3.0;   // max |v| in voxels
  double deform_sigma = 4.0;       // Gaussian smoothing of the velocity noise, in voxels
  double edge_sharpness = 2.0;     // logistic slope of blob edges per voxel
  double texture_contrast = 0.3;
  int integration_steps = 7;
  int max_retries = 10;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct SyntheticPair {
  Volume fixed;
  Volume moving;
  SegMask fixed_mask;
  SegMask moving_mask;
  VectorField ground_truth;  // displacement: fixed(x) ~ moving(x + u(x))
  std::uint64_t seed = 0;
};

/// Pure function of (seed, dims, config). Throws NumericError when no fold-free
/// ground truth was found within config.max_retries attempts.
SyntheticPair generate_pair(std::uint64_t seed, Dims dims, const SynthConfig& config);

/// Per-pair seed derived from a run seed and a pair index.
std::uint64_t pair_seed(std::uint64_t run_seed, std::uint64_t index);

}  // namespace attnreg
