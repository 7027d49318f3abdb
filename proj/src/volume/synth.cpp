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

#include "attnreg/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "attnreg/error.hpp"

namespace attnreg {

void SynthConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("synth config: ") + what);
  };
  check(amplitude >= 0.0 && std::isfinite(amplitude), "amplitude must be finite and non-negative");
  check(max_rotation_deg >= 0.0 && max_rotation_deg * amplitude <= 15.0, "rotation must be within 15 degrees");
  check(max_translation >= 0.0 && max_translation * amplitude <= 0.1, "translation must be within 10% of the extent");
  check(scale_range >= 0.0 && scale_range * amplitude <= 0.1, "scales must lie in [0.9, 1.1]");
  check(deform_amplitude >= 0.0 && std::isfinite(deform_amplitude), "deform_amplitude must be non-negative");
  check(deform_sigma > 0.0, "deform_sigma must be positive");
  check(edge_sharpness > 0.0, "edge_sharpness must be positive");
  check(texture_contrast >= 0.0 && texture_contrast < 1.0, "texture_contrast must lie in [0, 1)");
  check(integration_steps >= 0, "integration_steps must be non-negative");
  check(max_retries >= 1, "max_retries must be at least 1");
}

std::uint64_t pair_seed(std::uint64_t run_seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(run_seed ^ mix(index));
}

namespace {

using Vec3 = std::array<double, 3>;

struct Blob {
  Vec3 center;
  Vec3 radius;
};

struct Wave {
  Vec3 k;
  double phase;
};

struct Shape {
  std::vector<Blob> blobs;
  std::vector<Wave> waves;
  double sharpness;
  double contrast;

  double occupancy(const Vec3& p) const {
    double best = 0.0;
    for (const auto& b : blobs) {
      double g = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double t = (p[a] - b.center[a]) / b.radius[a];
        g += t * t;
      }
      const double rmin = std::min({b.radius[0], b.radius[1], b.radius[2]});
      const double o = 1.0 / (1.0 + std::exp(-sharpness * (1.0 - std::sqrt(g)) * rmin));
      best = std::max(best, o);
    }
    return best;
  }

  double texture(const Vec3& p) const {
    double s = 0.0;
    for (const auto& w : waves) s += std::sin(w.k[0] * p[0] + w.k[1] * p[1] + w.k[2] * p[2] + w.phase);
    return 1.0 - contrast * 0.5 * (1.0 + s / static_cast<double>(waves.size()));
  }
};

Shape random_shape(std::mt19937_64& rng, Dims d, const SynthConfig& cfg) {
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const Vec3 ext{static_cast<double>(d.nx), static_cast<double>(d.ny), static_cast<double>(d.nz)};
  // centre and radii as fractions of the extent: body, pedicles, spinous and transverse processes
  const std::array<std::array<double, 6>, 6> parts{{
      {0.50, 0.36, 0.50, 0.26, 0.21, 0.39},
      {0.38, 0.58, 0.50, 0.10, 0.14, 0.26},
      {0.62, 0.58, 0.50, 0.10, 0.14, 0.26},
      {0.50, 0.76, 0.45, 0.09, 0.20, 0.23},
      {0.28, 0.62, 0.50, 0.16, 0.09, 0.18},
      {0.72, 0.62, 0.50, 0.16, 0.09, 0.18},
  }};
  Shape s;
  s.sharpness = cfg.edge_sharpness;
  s.contrast = cfg.texture_contrast;
  for (const auto& p : parts) {
    Blob b;
    for (int a = 0; a < 3; ++a) {
      b.center[a] = (p[a] + 0.03 * jitter(rng)) * (ext[a] - 1.0);
      b.radius[a] = std::max(1.0, p[3 + a] * (1.0 + 0.15 * jitter(rng)) * ext[a]);
    }
    s.blobs.push_back(b);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 3; ++i) {
    Wave w;
    double len = 0.0;
    for (auto& c : w.k) {
      c = normal(rng);
      len += c * c;
    }
    len = std::sqrt(len);
    for (auto& c : w.k) c *= 2.0 * std::numbers::pi / (8.0 * len);
    w.phase = angle(rng);
    s.waves.push_back(w);
  }
  return s;
}

AffineParams random_affine(std::mt19937_64& rng, Dims d, const SynthConfig& cfg) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double deg = std::numbers::pi / 180.0;
  const double rx = u(rng) * cfg.max_rotation_deg * cfg.amplitude * deg;
  const double ry = u(rng) * cfg.max_rotation_deg * cfg.amplitude * deg;
  const double rz = u(rng) * cfg.max_rotation_deg * cfg.amplitude * deg;
  Vec3 scale, trans;
  for (int a = 0; a < 3; ++a) scale[a] = 1.0 + u(rng) * cfg.scale_range * cfg.amplitude;
  for (int a = 0; a < 3; ++a) trans[a] = u(rng) * cfg.max_translation * cfg.amplitude * d[a];

  using Mat = std::array<std::array<double, 3>, 3>;
  auto mul = [](const Mat& a, const Mat& b) {
    Mat c{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
  };
  const Mat Rx{{{1, 0, 0}, {0, std::cos(rx), -std::sin(rx)}, {0, std::sin(rx), std::cos(rx)}}};
  const Mat Ry{{{std::cos(ry), 0, std::sin(ry)}, {0, 1, 0}, {-std::sin(ry), 0, std::cos(ry)}}};
  const Mat Rz{{{std::cos(rz), -std::sin(rz), 0}, {std::sin(rz), std::cos(rz), 0}, {0, 0, 1}}};
  const Mat S{{{scale[0], 0, 0}, {0, scale[1], 0}, {0, 0, scale[2]}}};
  const Mat M = mul(mul(mul(Rz, Ry), Rx), S);

  // voxel-space map y = M (x - c) + c + t expressed on normalized coordinates
  AffineParams p;
  for (int i = 0; i < 3; ++i) {
    const double hi = std::max(0.5 * (d[i] - 1), 1e-12);
    for (int j = 0; j < 3; ++j) {
      const double hj = 0.5 * (d[j] - 1);
      p.a[i * 4 + j] = static_cast<float>(M[i][j] * hj / hi);
    }
    p.a[i * 4 + 3] = static_cast<float>(trans[i] / hi);
  }
  if (cfg.amplitude == 0.0) p = AffineParams::identity();
  return p;
}

void gaussian_smooth(std::vector<double>& a, Dims d, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& w : k) w /= total;
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = d[axis];
    line.resize(n);
    for (int z = 0; z < d.nz; ++z)
      for (int y = 0; y < d.ny; ++y)
        for (int x = 0; x < d.nx; ++x) {
          const int c[3] = {x, y, z};
          if (c[axis] != 0) continue;
          const std::int64_t base = d.index(x, y, z);
          for (int i = 0; i < n; ++i) line[i] = a[base + i * strides[axis]];
          for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = -r; j <= r; ++j) s += k[j + r] * line[std::clamp(i + j, 0, n - 1)];
            a[base + i * strides[axis]] = s;
          }
        }
  }
}

VectorField random_velocity(std::mt19937_64& rng, Dims d, const SynthConfig& cfg) {
  VectorField v(d, FieldKind::velocity);
  const double target = cfg.deform_amplitude * cfg.amplitude;
  if (target == 0.0) return v;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> ch(static_cast<std::size_t>(d.voxels()));
  std::array<std::vector<double>, 3> chans;
  double peak = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (auto& x : ch) x = normal(rng);
    gaussian_smooth(ch, d, cfg.deform_sigma);
    for (double x : ch) peak = std::max(peak, std::abs(x));
    chans[c] = ch;
  }
  const double k = peak > 0.0 ? target / peak : 0.0;
  for (int c = 0; c < 3; ++c) {
    auto out = v.channel(c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(chans[c][i] * k);
  }
  return v;
}

void render(const Shape& s, const VectorField* u, Volume& img, SegMask& mask) {
  const Dims d = img.dims();
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        if (u) {
          for (int a = 0; a < 3; ++a) p[a] += u->at(a, x, y, z);
        }
        const double o = s.occupancy(p);
        img.at(x, y, z) = static_cast<float>(o * s.texture(p));
        mask.at(x, y, z) = o > 0.5;
      }
}

}  // namespace

SyntheticPair generate_pair(std::uint64_t seed, Dims dims, const SynthConfig& config) {
  config.validate();
  if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) {
    throw ValidationError("synthetic pairs need at least 8 voxels per axis, got " + dims.str());
  }
  std::mt19937_64 rng(seed);
  const Shape shape = random_shape(rng, dims, config);
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    const AffineParams affine = random_affine(rng, dims, config);
    const VectorField velocity = random_velocity(rng, dims, config);
    VectorField gt = compose(affine_to_displacement(affine, dims), exponentiate(velocity, config.integration_steps));
    if (jacobian_stats(gt).nonpos_count > 0) continue;

    const Spacing unit{1.0, 1.0, 1.0};
    SyntheticPair pair{Volume(dims, unit), Volume(dims, unit), SegMask(dims, unit), SegMask(dims, unit),
                       std::move(gt), seed};
    render(shape, nullptr, pair.moving, pair.moving_mask);
    render(shape, &pair.ground_truth, pair.fixed, pair.fixed_mask);
    return pair;
  }
  throw NumericError("synthetic ground truth folded in all " + std::to_string(config.max_retries) +
                     " attempts (seed " + std::to_string(seed) + "); lower deform_amplitude");
}

}  // namespace attnreg
