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

// Raw-buffer kernels shared by the plain field operations and their
// differentiable counterparts. Fields are channel-major: channel c of a
// multi-channel image starts at c * voxels. Displacements are in voxel units,
// channel 0 along x, 1 along y, 2 along z.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "attnreg/dims.hpp"

namespace attnreg::kernels {

template <typename T>
struct AxisSample {
  int i0;
  int i1;
  T w;          // weight of i1
  bool inside;  // false when the coordinate was clamped to the border
};

template <typename T>
inline AxisSample<T> axis_sample(T pos, int n) {
  const T hi = static_cast<T>(n - 1);
  const bool inside = pos >= T(0) && pos <= hi;
  const T c = std::clamp(pos, T(0), hi);
  int i0 = static_cast<int>(std::floor(c));
  i0 = std::min(i0, std::max(n - 2, 0));
  const int i1 = std::min(i0 + 1, n - 1);
  return {i0, i1, c - static_cast<T>(i0), inside};
}

/// Trilinear value of one channel at a continuous voxel position, border clamped.
template <typename T>
inline T sample_trilinear(const T* img, Dims d, T px, T py, T pz) {
  const auto sx = axis_sample(px, d.nx);
  const auto sy = axis_sample(py, d.ny);
  const auto sz = axis_sample(pz, d.nz);
  const T wx0 = T(1) - sx.w, wy0 = T(1) - sy.w, wz0 = T(1) - sz.w;
  const T* p00 = img + d.index(0, sy.i0, sz.i0);
  const T* p10 = img + d.index(0, sy.i1, sz.i0);
  const T* p01 = img + d.index(0, sy.i0, sz.i1);
  const T* p11 = img + d.index(0, sy.i1, sz.i1);
  return wz0 * (wy0 * (wx0 * p00[sx.i0] + sx.w * p00[sx.i1]) +
                sy.w * (wx0 * p10[sx.i0] + sx.w * p10[sx.i1])) +
         sz.w * (wy0 * (wx0 * p01[sx.i0] + sx.w * p01[sx.i1]) +
                 sy.w * (wx0 * p11[sx.i0] + sx.w * p11[sx.i1]));
}

/// out(x) = img(x + disp(x)) for every channel.
template <typename T>
void warp_linear(const T* img, int channels, Dims d, const T* disp, T* out) {
  const std::int64_t n = d.voxels();
  const T* ux = disp;
  const T* uy = disp + n;
  const T* uz = disp + 2 * n;
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t i = d.index(x, y, z);
        const T px = static_cast<T>(x) + ux[i];
        const T py = static_cast<T>(y) + uy[i];
        const T pz = static_cast<T>(z) + uz[i];
        for (int c = 0; c < channels; ++c) {
          out[c * n + i] = sample_trilinear(img + c * n, d, px, py, pz);
        }
      }
    }
  }
}

/// Adjoint of warp_linear. Accumulates into gimg and gdisp; either may be null.
template <typename T>
void warp_linear_backward(const T* img, int channels, Dims d, const T* disp, const T* gout,
                          T* gimg, T* gdisp) {
  const std::int64_t n = d.voxels();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t i = d.index(x, y, z);
        const auto sx = axis_sample(static_cast<T>(x) + disp[i], d.nx);
        const auto sy = axis_sample(static_cast<T>(y) + disp[n + i], d.ny);
        const auto sz = axis_sample(static_cast<T>(z) + disp[2 * n + i], d.nz);
        const T wx[2] = {T(1) - sx.w, sx.w};
        const T wy[2] = {T(1) - sy.w, sy.w};
        const T wz[2] = {T(1) - sz.w, sz.w};
        const int ix[2] = {sx.i0, sx.i1};
        const int iy[2] = {sy.i0, sy.i1};
        const int iz[2] = {sz.i0, sz.i1};
        T gx = 0, gy = 0, gz = 0;
        for (int c = 0; c < channels; ++c) {
          const T g = gout[c * n + i];
          if (g == T(0)) continue;
          const T* im = img + c * n;
          T v[2][2][2];
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e) v[a][b][e] = im[d.index(ix[e], iy[b], iz[a])];
          if (gimg) {
            T* gi = gimg + c * n;
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int e = 0; e < 2; ++e) gi[d.index(ix[e], iy[b], iz[a])] += g * wz[a] * wy[b] * wx[e];
          }
          if (gdisp) {
            T dx = 0, dy = 0, dz = 0;
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b) {
                dx += wz[a] * wy[b] * (v[a][b][1] - v[a][b][0]);
              }
            for (int a = 0; a < 2; ++a)
              for (int e = 0; e < 2; ++e) {
                dy += wz[a] * wx[e] * (v[a][1][e] - v[a][0][e]);
              }
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e) {
                dz += wy[b] * wx[e] * (v[1][b][e] - v[0][b][e]);
              }
            gx += g * dx;
            gy += g * dy;
            gz += g * dz;
          }
        }
        if (gdisp) {
          if (sx.inside) gdisp[i] += gx;
          if (sy.inside) gdisp[n + i] += gy;
          if (sz.inside) gdisp[2 * n + i] += gz;
        }
      }
    }
  }
}

template <typename T>
inline int nearest_index(T pos, int n) {
  const T c = std::clamp(pos, T(0), static_cast<T>(n - 1));
  return static_cast<int>(std::floor(c + T(0.5)));
}

template <typename T, typename V>
void warp_nearest(const V* img, int channels, Dims d, const T* disp, V* out) {
  const std::int64_t n = d.voxels();
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int64_t i = d.index(x, y, z);
        const std::int64_t src = d.index(nearest_index(static_cast<T>(x) + disp[i], d.nx),
                                         nearest_index(static_cast<T>(y) + disp[n + i], d.ny),
                                         nearest_index(static_cast<T>(z) + disp[2 * n + i], d.nz));
        for (int c = 0; c < channels; ++c) out[c * n + i] = img[c * n + src];
      }
    }
  }
}

/// Half-extent of an axis: voxel index x maps to normalized (x - s) / s.
inline double half_extent(int n) { return n > 1 ? 0.5 * (n - 1) : 0.0; }

/// Normalized coordinate of voxel index x on an axis of length n, in [-1, 1].
template <typename T>
inline T normalized_coord(int x, int n) {
  return n > 1 ? static_cast<T>(2.0 * x / (n - 1) - 1.0) : T(0);
}

/// Dense displacement of the affine map [A|t] acting on normalized coordinates.
/// Written as s * ((A - I) c + t) so the identity yields exactly zero.
template <typename T>
void affine_displacement(const T* p, Dims d, T* out) {
  const std::int64_t n = d.voxels();
  const T s[3] = {static_cast<T>(half_extent(d.nx)), static_cast<T>(half_extent(d.ny)),
                  static_cast<T>(half_extent(d.nz))};
  T m[3][4];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) m[r][c] = p[r * 4 + c] - (r == c ? T(1) : T(0));
  for (int z = 0; z < d.nz; ++z) {
    const T cz = normalized_coord<T>(z, d.nz);
    for (int y = 0; y < d.ny; ++y) {
      const T cy = normalized_coord<T>(y, d.ny);
      for (int x = 0; x < d.nx; ++x) {
        const T cx = normalized_coord<T>(x, d.nx);
        const std::int64_t i = d.index(x, y, z);
        for (int r = 0; r < 3; ++r) {
          out[r * n + i] = s[r] * (m[r][0] * cx + m[r][1] * cy + m[r][2] * cz + m[r][3]);
        }
      }
    }
  }
}

/// Accumulates d(loss)/d(params) given d(loss)/d(displacement).
template <typename T>
void affine_displacement_backward(Dims d, const T* gout, T* gp) {
  const std::int64_t n = d.voxels();
  const T s[3] = {static_cast<T>(half_extent(d.nx)), static_cast<T>(half_extent(d.ny)),
                  static_cast<T>(half_extent(d.nz))};
  T acc[3][4] = {};
  for (int z = 0; z < d.nz; ++z) {
    const T cz = normalized_coord<T>(z, d.nz);
    for (int y = 0; y < d.ny; ++y) {
      const T cy = normalized_coord<T>(y, d.ny);
      for (int x = 0; x < d.nx; ++x) {
        const T cx = normalized_coord<T>(x, d.nx);
        const std::int64_t i = d.index(x, y, z);
        for (int r = 0; r < 3; ++r) {
          const T g = gout[r * n + i];
          acc[r][0] += g * cx;
          acc[r][1] += g * cy;
          acc[r][2] += g * cz;
          acc[r][3] += g;
        }
      }
    }
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) gp[r * 4 + c] += s[r] * acc[r][c];
}

}  // namespace attnreg::kernels
