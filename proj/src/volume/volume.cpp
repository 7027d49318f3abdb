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

#include "attnreg/volume.hpp"

#include <cmath>
#include <sstream>

#include "attnreg/error.hpp"

namespace attnreg {

std::string Dims::str() const {
  return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
}

Dims parse_dims(const std::string& text) {
  Dims d;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> d.nx >> x1 >> d.ny >> x2 >> d.nz) || x1 != 'x' || x2 != 'x' || !in.eof() ||
      d.nx <= 0 || d.ny <= 0 || d.nz <= 0) {
    throw ValidationError("bad dims '" + text + "', expected NXxNYxNZ with positive integers");
  }
  return d;
}

static void check_grid(const Dims& dims, const Spacing& spacing, std::size_t n) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw ValidationError("dims must be positive, got " + dims.str());
  }
  for (double s : spacing) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("spacing must be positive and finite");
  }
  if (static_cast<std::int64_t>(n) != dims.voxels()) {
    throw ValidationError("data length " + std::to_string(n) + " does not match dims " + dims.str());
  }
}

Volume::Volume(Dims dims, Spacing spacing, float fill)
    : dims_(dims), spacing_(spacing), data_(static_cast<std::size_t>(dims.voxels()), fill) {
  check_grid(dims_, spacing_, data_.size());
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_grid(dims_, spacing_, data_.size());
}

void Volume::check_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      const auto idx = static_cast<std::int64_t>(i);
      const int x = static_cast<int>(idx % dims_.nx);
      const int y = static_cast<int>((idx / dims_.nx) % dims_.ny);
      const int z = static_cast<int>(idx / (static_cast<std::int64_t>(dims_.nx) * dims_.ny));
      throw ValidationError("non-finite value at voxel index " + std::to_string(idx) + " (x=" +
                            std::to_string(x) + ", y=" + std::to_string(y) +
                            ", z=" + std::to_string(z) + ")");
    }
  }
}

SegMask::SegMask(Dims dims, Spacing spacing)
    : dims_(dims), spacing_(spacing), data_(static_cast<std::size_t>(dims.voxels()), 0) {
  check_grid(dims_, spacing_, data_.size());
}

SegMask::SegMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
  check_grid(dims_, spacing_, data_.size());
  for (auto v : data_) {
    if (v > 1) throw ValidationError("mask values must be 0 or 1");
  }
}

std::int64_t SegMask::count() const {
  std::int64_t n = 0;
  for (auto v : data_) n += v;
  return n;
}

SegMask SegMask::threshold(const Volume& v, float level) {
  SegMask m(v.dims(), v.spacing());
  auto src = v.data();
  for (std::size_t i = 0; i < src.size(); ++i) m.data_[i] = src[i] > level ? 1 : 0;
  return m;
}

Volume SegMask::to_volume() const {
  Volume v(dims_, spacing_);
  auto dst = v.data();
  for (std::size_t i = 0; i < data_.size(); ++i) dst[i] = data_[i] ? 1.0f : 0.0f;
  return v;
}

void require_same_grid(const Dims& a, const Dims& b, const char* what) {
  if (!(a == b)) {
    throw ValidationError(std::string(what) + ": dims mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace attnreg
