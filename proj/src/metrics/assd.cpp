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

#include <cmath>
#include <limits>

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"

namespace attnreg {

namespace {

constexpr double kFar = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), weighted by the
// axis spacing. Values equal to kFar mark voxels without a site.
void edt_1d(const double* f, int n, double w2, double* out, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kFar) continue;
    const double fq = f[q] + w2 * q * q;
    while (k >= 0) {
      const int p = v[k];
      const double s = (fq - (f[p] + w2 * p * p)) / (2.0 * w2 * (q - p));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kFar;
    }
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) out[q] = kFar;
    return;
  }
  z[k + 1] = kFar;
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    out[q] = f[v[j]] + w2 * dq * dq;
  }
}

}  // namespace

SegMask surface(const SegMask& m) {
  const Dims d = m.dims();
  SegMask s(d, m.spacing());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!m.at(x, y, z)) continue;
        const bool border = x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1;
        s.at(x, y, z) = border || !m.at(x - 1, y, z) || !m.at(x + 1, y, z) || !m.at(x, y - 1, z) ||
                        !m.at(x, y + 1, z) || !m.at(x, y, z - 1) || !m.at(x, y, z + 1);
      }
  return s;
}

std::vector<double> squared_distance_transform(const SegMask& sites, const Spacing& spacing) {
  const Dims d = sites.dims();
  std::vector<double> g(static_cast<std::size_t>(d.voxels()));
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = sites.data()[i] ? 0.0 : kFar;
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  std::vector<double> line, out;
  std::vector<int> v;
  std::vector<double> z;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    const double w2 = spacing[axis] * spacing[axis];
    line.resize(n);
    out.resize(n);
    for (int zz = 0; zz < d.nz; ++zz)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const int c[3] = {x, y, zz};
          if (c[axis] != 0) continue;
          const std::int64_t base = d.index(x, y, zz);
          for (int i = 0; i < n; ++i) line[i] = g[base + i * strides[axis]];
          edt_1d(line.data(), n, w2, out.data(), v, z);
          for (int i = 0; i < n; ++i) g[base + i * strides[axis]] = out[i];
        }
  }
  return g;
}

double assd(const SegMask& a, const SegMask& b, const Spacing& spacing) {
  require_same_grid(a.dims(), b.dims(), "assd");
  if (a.count() == 0 || b.count() == 0) throw ValidationError("assd needs two non-empty masks");
  const SegMask sa = surface(a), sb = surface(b);
  const auto da = squared_distance_transform(sa, spacing);
  const auto db = squared_distance_transform(sb, spacing);
  // (sum over S_a + sum over S_b) / (|S_a| + |S_b|), each sum in linear voxel order.
  auto directed = [](const SegMask& from, const std::vector<double>& to_dist, std::int64_t& count) {
    double sum = 0.0;
    for (std::size_t i = 0; i < to_dist.size(); ++i) {
      if (from.data()[i]) {
        sum += std::sqrt(to_dist[i]);
        ++count;
      }
    }
    return sum;
  };
  std::int64_t count = 0;
  const double sum_a = directed(sa, db, count);
  const double sum_b = directed(sb, da, count);
  return (sum_a + sum_b) / static_cast<double>(count);
}

}  // namespace attnreg
