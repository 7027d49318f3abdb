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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "attnreg/dims.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

/// Row-major 3x4 matrix [A|t] acting on coordinates normalized to [-1, 1] per axis.
struct AffineParams {
  std::array<float, 12> a{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  static AffineParams identity() { return {}; }
  void check_finite() const;
  bool operator==(const AffineParams&) const = default;
};

enum class FieldKind { velocity, displacement };

/// Three-channel field in voxel units, channel-major (all x, then y, then z).
class VectorField {
 public:
  VectorField() = default;
  VectorField(Dims dims, FieldKind kind);
  VectorField(Dims dims, FieldKind kind, std::vector<float> data);

  const Dims& dims() const { return dims_; }
  FieldKind kind() const { return kind_; }
  void set_kind(FieldKind k) { kind_ = k; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::span<float> channel(int c) {
    return std::span<float>(data_).subspan(c * dims_.voxels(), dims_.voxels());
  }
  std::span<const float> channel(int c) const {
    return std::span<const float>(data_).subspan(c * dims_.voxels(), dims_.voxels());
  }
  float& at(int c, int x, int y, int z) { return data_[c * dims_.voxels() + dims_.index(x, y, z)]; }
  float at(int c, int x, int y, int z) const {
    return data_[c * dims_.voxels() + dims_.index(x, y, z)];
  }

  void check_finite() const;
  float max_abs() const;

  bool operator==(const VectorField&) const = default;

 private:
  Dims dims_;
  FieldKind kind_ = FieldKind::displacement;
  std::vector<float> data_;
};

enum class Interp { linear, nearest };

VectorField affine_to_displacement(const AffineParams& p, Dims dims);

/// out(x) = v(x + u(x)), border-clamped sampling.
Volume warp(const Volume& v, const VectorField& u, Interp mode = Interp::linear);
SegMask warp(const SegMask& m, const VectorField& u);

/// Displacement of (id + u1) o (id + u2).
VectorField compose(const VectorField& u1, const VectorField& u2);

inline constexpr int kDefaultIntegrationSteps = 7;

/// Scaling-and-squaring exponential of a stationary velocity field.
VectorField exponentiate(const VectorField& v, int steps = kDefaultIntegrationSteps);

struct JacobianStats {
  std::int64_t nonpos_count = 0;
  double nonpos_percent = 0.0;
  Volume det_map;
};

/// det(I + grad u) with central differences inside and one-sided differences on faces.
JacobianStats jacobian_stats(const VectorField& u);

}  // namespace attnreg
