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

#include "attnreg/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "attnreg/error.hpp"
#include "attnreg/field_kernels.hpp"

namespace attnreg {

Volume resample_isotropic(const Volume& v, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) throw ValidationError("target spacing must be positive");
  const Dims src = v.dims();
  int out_n[3];
  for (int a = 0; a < 3; ++a) {
    const double extent = src[a] * v.spacing()[a] / target;
    out_n[a] = std::max(1, static_cast<int>(std::ceil(extent - 1e-9)));
    if (v.spacing()[a] != target && src[a] < 2) {
      throw ValidationError("resampling needs at least 2 voxels along axis " + std::to_string(a));
    }
  }
  const Dims dst{out_n[0], out_n[1], out_n[2]};
  const double ratio[3] = {target / v.spacing()[0], target / v.spacing()[1], target / v.spacing()[2]};
  std::vector<float> out(static_cast<std::size_t>(dst.voxels()));
  for (int z = 0; z < dst.nz; ++z)
    for (int y = 0; y < dst.ny; ++y)
      for (int x = 0; x < dst.nx; ++x) {
        const double px = x * ratio[0], py = y * ratio[1], pz = z * ratio[2];
        out[dst.index(x, y, z)] = kernels::sample_trilinear<float>(
            v.data().data(), src, static_cast<float>(px), static_cast<float>(py), static_cast<float>(pz));
      }
  return Volume(dst, {target, target, target}, std::move(out));
}

std::pair<Volume, SegMask> mask_and_crop(const Volume& v, const SegMask& m, Dims out) {
  require_same_grid(v.dims(), m.dims(), "mask_and_crop");
  const Dims d = v.dims();
  if (out.nx <= 0 || out.ny <= 0 || out.nz <= 0 || out.nx > d.nx || out.ny > d.ny || out.nz > d.nz) {
    throw ValidationError("crop dims " + out.str() + " do not fit in " + d.str());
  }
  int lo[3] = {d.nx, d.ny, d.nz}, hi[3] = {-1, -1, -1};
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!m.at(x, y, z)) continue;
        const int c[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], c[a]);
          hi[a] = std::max(hi[a], c[a]);
        }
      }
  if (hi[0] < 0) throw ValidationError("mask_and_crop: mask is empty");
  int start[3];
  for (int a = 0; a < 3; ++a) {
    start[a] = (lo[a] + hi[a] + 1) / 2 - out[a] / 2;
    start[a] = std::clamp(start[a], 0, d[a] - out[a]);
  }
  Volume cv(out, v.spacing());
  SegMask cm(out, m.spacing());
  for (int z = 0; z < out.nz; ++z)
    for (int y = 0; y < out.ny; ++y)
      for (int x = 0; x < out.nx; ++x) {
        const int sx = x + start[0], sy = y + start[1], sz = z + start[2];
        const std::uint8_t bit = m.at(sx, sy, sz);
        cm.at(x, y, z) = bit;
        cv.at(x, y, z) = bit ? v.at(sx, sy, sz) : 0.0f;
      }
  return {std::move(cv), std::move(cm)};
}

Volume normalize_intensity(const Volume& v) {
  v.check_finite();
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  Volume out(v.dims(), v.spacing());
  const float mn = *lo, range = *hi - *lo;
  if (range > 0.0f) {
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = (v.data()[i] - mn) / range;
  }
  return out;
}

}  // namespace attnreg
