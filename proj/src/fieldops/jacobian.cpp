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

#include "attnreg/error.hpp"
#include "attnreg/field_ops.hpp"

namespace attnreg {

namespace {

// Derivative of one channel along an axis at integer position i on an axis of length n.
inline double diff(const float* ch, std::int64_t idx, std::int64_t stride, int i, int n) {
  if (n < 2) return 0.0;
  if (i == 0) return static_cast<double>(ch[idx + stride]) - ch[idx];
  if (i == n - 1) return static_cast<double>(ch[idx]) - ch[idx - stride];
  return 0.5 * (static_cast<double>(ch[idx + stride]) - ch[idx - stride]);
}

}  // namespace

JacobianStats jacobian_stats(const VectorField& u) {
  const Dims d = u.dims();
  JacobianStats stats;
  stats.det_map = Volume(d, {1.0, 1.0, 1.0});
  const std::int64_t n = d.voxels();
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  const float* ch[3] = {u.data().data(), u.data().data() + n, u.data().data() + 2 * n};
  auto det = stats.det_map.data();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t idx = d.index(x, y, z);
        const int pos[3] = {x, y, z};
        double j[3][3];
        for (int c = 0; c < 3; ++c) {
          for (int a = 0; a < 3; ++a) {
            j[c][a] = diff(ch[c], idx, strides[a], pos[a], d[a]) + (c == a ? 1.0 : 0.0);
          }
        }
        const double value = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                             j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                             j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        det[idx] = static_cast<float>(value);
        if (value <= 0.0) ++stats.nonpos_count;
      }
    }
  }
  stats.nonpos_percent = 100.0 * static_cast<double>(stats.nonpos_count) / static_cast<double>(n);
  return stats;
}

}  // namespace attnreg
