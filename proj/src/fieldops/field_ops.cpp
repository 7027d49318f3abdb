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

#include "attnreg/field_ops.hpp"

#include <cmath>

#include "attnreg/error.hpp"
#include "attnreg/field_kernels.hpp"

namespace attnreg {

void AffineParams::check_finite() const {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      throw ValidationError("affine parameter " + std::to_string(i) + " is not finite");
    }
  }
}

VectorField::VectorField(Dims dims, FieldKind kind)
    : dims_(dims), kind_(kind), data_(static_cast<std::size_t>(3 * dims.voxels()), 0.0f) {}

VectorField::VectorField(Dims dims, FieldKind kind, std::vector<float> data)
    : dims_(dims), kind_(kind), data_(std::move(data)) {
  if (static_cast<std::int64_t>(data_.size()) != 3 * dims_.voxels()) {
    throw ValidationError("vector field needs 3 x " + std::to_string(dims_.voxels()) +
                          " values, got " + std::to_string(data_.size()));
  }
}

void VectorField::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("non-finite vector field value at flat index " + std::to_string(i));
    }
  }
}

float VectorField::max_abs() const {
  float m = 0.0f;
  for (float v : data_) m = std::max(m, std::abs(v));
  return m;
}

VectorField affine_to_displacement(const AffineParams& p, Dims dims) {
  p.check_finite();
  VectorField u(dims, FieldKind::displacement);
  kernels::affine_displacement(p.a.data(), dims, u.data().data());
  return u;
}

Volume warp(const Volume& v, const VectorField& u, Interp mode) {
  require_same_grid(v.dims(), u.dims(), "warp");
  Volume out(v.dims(), v.spacing());
  if (mode == Interp::linear) {
    kernels::warp_linear(v.data().data(), 1, v.dims(), u.data().data(), out.data().data());
  } else {
    kernels::warp_nearest(v.data().data(), 1, v.dims(), u.data().data(), out.data().data());
  }
  return out;
}

SegMask warp(const SegMask& m, const VectorField& u) {
  require_same_grid(m.dims(), u.dims(), "warp");
  SegMask out(m.dims(), m.spacing());
  kernels::warp_nearest(m.data().data(), 1, m.dims(), u.data().data(), out.data().data());
  return out;
}

VectorField compose(const VectorField& u1, const VectorField& u2) {
  require_same_grid(u1.dims(), u2.dims(), "compose");
  VectorField out(u1.dims(), FieldKind::displacement);
  auto o = out.data();
  kernels::warp_linear(u1.data().data(), 3, u1.dims(), u2.data().data(), o.data());
  auto b = u2.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += b[i];
  return out;
}

VectorField exponentiate(const VectorField& v, int steps) {
  if (steps < 0) throw ValidationError("integration steps must be >= 0");
  VectorField u(v.dims(), FieldKind::displacement);
  const float scale = std::ldexp(1.0f, -steps);
  auto src = v.data();
  auto dst = u.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * scale;
  for (int s = 0; s < steps; ++s) u = compose(u, u);
  return u;
}

}  // namespace attnreg
