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

// Brute-force reference implementations used only by tests. Nothing here
// includes or links the library; inputs are plain arrays in double precision.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

struct Grid {
  int nx, ny, nz;
  std::int64_t voxels() const { return static_cast<std::int64_t>(nx) * ny * nz; }
};

class SizeGuardError : public std::exception {
 public:
  const char* what() const noexcept override { return "oracle size guard exceeded"; }
};

enum class AttentionScaling { per_head, model_dim };

/// Literal multi-head attention: Q = E Wq + bq, K = E Wk + bk, V = E Wv + bv
/// (row-major k x k weights), per-head softmax(Q K^T / sqrt(d)) V. Returns the
/// concatenated head outputs (L x k), before any output projection.
std::vector<double> attention(std::span<const double> e, int len, int dim,
                              std::span<const double> wq, std::span<const double> bq,
                              std::span<const double> wk, std::span<const double> bk,
                              std::span<const double> wv, std::span<const double> bv, int heads,
                              AttentionScaling scaling);

/// Mean over voxels of squared local correlation; each n^3 window keeps only in-volume voxels.
double lncc(std::span<const double> f, std::span<const double> w, Grid g, int n, double eps);

/// Pairwise surface-to-surface ASSD in millimetres.
double assd(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, Grid g,
            std::array<double, 3> spacing);

/// Direct trilinear value at a continuous voxel position, border clamped.
double trilinear(std::span<const double> v, Grid g, double x, double y, double z);

/// exp(M) by Taylor series until terms vanish.
std::array<double, 9> expm(const std::array<double, 9>& m);

struct FiniteDiffSpec {
  double h = 1e-3;
  double tolerance = 1e-2;
  double mask_threshold = 1e-6;
};

/// Central differences (f(p + h) - f(p - h)) / 2h for the selected coordinates.
std::vector<double> grad(const std::function<double()>& fn, std::span<double> params,
                         std::span<const std::int64_t> coords, const FiniteDiffSpec& spec);

}  // namespace oracle
