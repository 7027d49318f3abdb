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

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "attnreg/field_ops.hpp"
#include "attnreg/volume.hpp"
#include "oracles.hpp"

namespace testutil {

inline oracle::Grid grid(attnreg::Dims d) { return {d.nx, d.ny, d.nz}; }

inline std::vector<double> to_double(std::span<const float> s) { return {s.begin(), s.end()}; }

inline attnreg::Volume random_volume(attnreg::Dims d, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  attnreg::Volume v(d, {1.0, 1.0, 1.0});
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& x : v.data()) x = static_cast<float>(u(rng));
  return v;
}

inline attnreg::SegMask random_mask(attnreg::Dims d, std::mt19937_64& rng, double p = 0.3,
                                    attnreg::Spacing spacing = {1.0, 1.0, 1.0}) {
  attnreg::SegMask m(d, spacing);
  std::bernoulli_distribution b(p);
  for (auto& x : m.data()) x = b(rng) ? 1 : 0;
  return m;
}

/// Gaussian-smoothed white noise rescaled so max |v| equals `amplitude` (voxels).
inline attnreg::VectorField smooth_velocity(attnreg::Dims d, std::uint64_t seed, double amplitude, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  attnreg::VectorField v(d, attnreg::FieldKind::velocity);
  double peak = 0.0;
  std::vector<std::vector<double>> chans(3);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> a(static_cast<std::size_t>(d.voxels()));
    for (auto& x : a) x = n(rng);
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> b(a.size(), 0.0);
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
          for (int x = 0; x < d.nx; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
              int p[3] = {x, y, z};
              p[axis] = std::clamp(p[axis] + t, 0, d[axis] - 1);
              acc += k[t + radius] * a[d.index(p[0], p[1], p[2])];
            }
            b[d.index(x, y, z)] = acc;
          }
      a.swap(b);
    }
    for (double x : a) peak = std::max(peak, std::abs(x));
    chans[c] = std::move(a);
  }
  for (int c = 0; c < 3; ++c) {
    auto ch = v.channel(c);
    for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = static_cast<float>(chans[c][i] * amplitude / peak);
  }
  return v;
}

/// u(p) = M (p - centre), row-major M.
inline attnreg::VectorField linear_field(attnreg::Dims d, const std::array<double, 9>& m, attnreg::FieldKind kind) {
  attnreg::VectorField u(d, kind);
  const double c[3] = {(d.nx - 1) / 2.0, (d.ny - 1) / 2.0, (d.nz - 1) / 2.0};
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const double p[3] = {x - c[0], y - c[1], z - c[2]};
        for (int r = 0; r < 3; ++r)
          u.at(r, x, y, z) = static_cast<float>(m[3 * r] * p[0] + m[3 * r + 1] * p[1] + m[3 * r + 2] * p[2]);
      }
  return u;
}

inline bool interior(attnreg::Dims d, int x, int y, int z, int margin) {
  return x >= margin && y >= margin && z >= margin && x < d.nx - margin && y < d.ny - margin && z < d.nz - margin;
}

}  // namespace testutil
