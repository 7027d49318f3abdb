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
#include <span>
#include <vector>

#include "attnreg/dims.hpp"

namespace attnreg {

/// Scalar 3D image with physical spacing (mm per voxel).
class Volume {
 public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, float fill = 0.0f);
  Volume(Dims dims, Spacing spacing, std::vector<float> data);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& values() { return data_; }

  float& at(int x, int y, int z) { return data_[dims_.index(x, y, z)]; }
  float at(int x, int y, int z) const { return data_[dims_.index(x, y, z)]; }

  /// Throws ValidationError naming the first offending voxel.
  void check_finite() const;

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_;
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<float> data_;
};

/// Binary mask aligned to a Volume.
class SegMask {
 public:
  SegMask() = default;
  SegMask(Dims dims, Spacing spacing);
  SegMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> data);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  std::uint8_t& at(int x, int y, int z) { return data_[dims_.index(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return data_[dims_.index(x, y, z)]; }

  std::int64_t count() const;

  /// Voxels strictly above `level` become 1.
  static SegMask threshold(const Volume& v, float level = 0.5f);
  Volume to_volume() const;

  bool operator==(const SegMask&) const = default;

 private:
  Dims dims_;
  Spacing spacing_{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> data_;
};

void require_same_grid(const Dims& a, const Dims& b, const char* what);

}  // namespace attnreg
