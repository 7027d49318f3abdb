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
#include <string>

namespace attnreg {

/// Grid extent; x varies fastest in every linear layout.
struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  constexpr std::int64_t voxels() const {
    return static_cast<std::int64_t>(nx) * ny * nz;
  }
  constexpr std::int64_t index(int x, int y, int z) const {
    return x + static_cast<std::int64_t>(nx) * (y + static_cast<std::int64_t>(ny) * z);
  }
  constexpr int operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  constexpr bool operator==(const Dims&) const = default;

  std::string str() const;
};

using Spacing = std::array<double, 3>;

/// Parses "32x32x16".
Dims parse_dims(const std::string& text);

}  // namespace attnreg
