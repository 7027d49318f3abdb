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

#include <utility>

#include "attnreg/volume.hpp"

namespace attnreg {

/// Trilinear resampling onto a grid of spacing `target` mm; output voxel i
/// sits at physical position i * target. Output dims are ceil(n * s / target).
Volume resample_isotropic(const Volume& v, double target);

/// Zeroes intensities outside the mask and crops a window of `out` voxels
/// centred on the mask's bounding box, clamped to the volume.
std::pair<Volume, SegMask> mask_and_crop(const Volume& v, const SegMask& m, Dims out);

/// Linear rescale of [min, max] to [0, 1]; constant volumes become zero.
Volume normalize_intensity(const Volume& v);

}  // namespace attnreg
