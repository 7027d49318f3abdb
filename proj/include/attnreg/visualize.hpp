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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "attnreg/field_ops.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill);
  std::uint8_t* pixel(int x, int y) { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* pixel(int x, int y) const { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
};

/// Middle transversal plane (x right, y down) or middle sagittal plane (y right, z down).
enum class Plane { transversal, sagittal };

const char* plane_name(Plane p);
/// In-plane pixel extent before upscaling.
std::pair<int, int> plane_size(Dims d, Plane p);

struct ColorMap {
  RgbImage image;
  double range = 0.0;  // displacement (voxels) mapped to full saturation
};

/// Channels x, y, z to R, G, B around mid-gray, clamped symmetrically at the 99th
/// percentile of |u| over the plane.
ColorMap field_rgb(const VectorField& u, Plane p, int upscale);

/// Regular grid with a line every `every` voxels, each point moved by its in-plane displacement.
RgbImage field_grid(const VectorField& u, Plane p, int upscale, int every = 4);

/// Horizontal bar from -range (left) to +range (right) for one channel colour ramp.
RgbImage range_legend(int width, int height);

/// Grayscale slices side by side, sharing one intensity window.
RgbImage intensity_montage(const std::vector<const Volume*>& vols, Plane p, int upscale);

void write_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace attnreg
