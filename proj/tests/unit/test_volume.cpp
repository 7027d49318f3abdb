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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "attnreg/error.hpp"
#include "json.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/preprocess.hpp"
#include "attnreg/synth.hpp"
#include "attnreg/volr_io.hpp"
#include "test_helpers.hpp"

using namespace attnreg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attnreg_test_volume_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(VolrIo, VolumeRoundTripIsBitExact) {
  const fs::path dir = temp_dir("roundtrip");
  std::mt19937_64 rng(1);
  Volume v = testutil::random_volume({8, 7, 6}, rng, -1e3, 1e3);
  v = Volume(v.dims(), {0.5, 1.25, 2.0}, std::vector<float>(v.data().begin(), v.data().end()));
  save_volume(v, dir / "a.volr");
  EXPECT_TRUE(fs::exists(dir / "a.json"));
  EXPECT_TRUE(fs::exists(dir / "a.raw"));
  const Volume back = load_volume(dir / "a.volr");
  EXPECT_EQ(back, v);
  EXPECT_EQ(load_volume(dir / "a.json"), v);
  EXPECT_EQ(load_volume(dir / "a"), v);
}

TEST(VolrIo, SidecarMatchesFormat) {
  const fs::path dir = temp_dir("sidecar");
  save_volume(Volume({1, 1, 1}, {1, 1, 1}, 3.5f), dir / "one.volr");
  EXPECT_EQ(fs::file_size(dir / "one.raw"), 4u);
  std::ifstream in(dir / "one.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("dtype"), "f32le");
  EXPECT_EQ(j.at("data"), "one.raw");
  EXPECT_EQ(j.at("dims"), nlohmann::json::array({1, 1, 1}));
  // Little-endian payload.
  std::ifstream raw(dir / "one.raw", std::ios::binary);
  unsigned char b[4];
  raw.read(reinterpret_cast<char*>(b), 4);
  EXPECT_EQ(b[3], 0x40);
  EXPECT_EQ(b[2], 0x60);
}

TEST(VolrIo, RejectsNanBeforeWriting) {
  const fs::path dir = temp_dir("nan");
  Volume v({2, 2, 2}, {1, 1, 1});
  v.at(1, 1, 1) = NAN;
  EXPECT_THROW(save_volume(v, dir / "bad.volr"), ValidationError);
  EXPECT_FALSE(fs::exists(dir / "bad.raw"));
}

TEST(VolrIo, DetectsTruncatedPayload) {
  const fs::path dir = temp_dir("trunc");
  save_volume(Volume({4, 4, 4}, {1, 1, 1}, 1.0f), dir / "v.volr");
  fs::resize_file(dir / "v.raw", 60);
  EXPECT_THROW(load_volume(dir / "v.volr"), IoError);
  EXPECT_THROW(load_volume(dir / "missing.volr"), IoError);
}

TEST(VolrIo, MaskAndFieldRoundTrips) {
  const fs::path dir = temp_dir("maskfield");
  std::mt19937_64 rng(2);
  const SegMask m = testutil::random_mask({6, 5, 4}, rng);
  save_mask(m, dir / "m.volr");
  EXPECT_EQ(load_mask(dir / "m.volr"), m);
  VectorField u = testutil::smooth_velocity({6, 5, 4}, 3, 2.0, 1.0);
  save_field(u, dir / "u.volr");
  EXPECT_EQ(load_field(dir / "u.volr"), u);
  EXPECT_THROW(load_volume(dir / "u.volr"), IoError);
  save_volume(Volume({2, 2, 2}, {1, 1, 1}, 0.5f), dir / "soft.volr");
  EXPECT_THROW(load_mask(dir / "soft.volr"), ValidationError);
}

TEST(Preprocess, ResampleAtSourceSpacingIsIdentity) {
  std::mt19937_64 rng(3);
  const Volume v = testutil::random_volume({5, 6, 7}, rng);
  EXPECT_EQ(resample_isotropic(v, 1.0), v);
}

TEST(Preprocess, ResampleRampToHalfSpacing) {
  Volume v({6, 3, 3}, {1, 1, 1});
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 6; ++x) v.at(x, y, z) = static_cast<float>(x);
  const Volume r = resample_isotropic(v, 0.5);
  EXPECT_EQ(r.dims(), (Dims{12, 6, 6}));
  EXPECT_EQ(r.spacing(), (Spacing{0.5, 0.5, 0.5}));
  for (int x = 0; x < 11; ++x) EXPECT_FLOAT_EQ(r.at(x, 1, 1), 0.5f * x);
}

TEST(Preprocess, ResampleMatchesTrilinearOracle) {
  std::mt19937_64 rng(4);
  const Volume v = testutil::random_volume({4, 4, 4}, rng);
  const Volume r = resample_isotropic(v, 2.0);
  EXPECT_EQ(r.dims(), (Dims{2, 2, 2}));
  const auto vd = testutil::to_double(v.data());
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        EXPECT_NEAR(r.at(x, y, z), oracle::trilinear(vd, {4, 4, 4}, 2.0 * x, 2.0 * y, 2.0 * z), 1e-6);
      }
}

TEST(Preprocess, CropIdentityAndCentering) {
  std::mt19937_64 rng(5);
  const Volume v = testutil::random_volume({6, 6, 6}, rng);
  SegMask all(v.dims(), v.spacing());
  for (auto& x : all.data()) x = 1;
  const auto [cv, cm] = mask_and_crop(v, all, v.dims());
  EXPECT_EQ(cv, v);
  EXPECT_EQ(cm, all);

  Volume big({16, 16, 16}, {1, 1, 1}, 2.0f);
  SegMask one(big.dims(), big.spacing());
  one.at(5, 5, 5) = 1;
  const auto [bv, bm] = mask_and_crop(big, one, {8, 8, 8});
  EXPECT_EQ(bv.dims(), (Dims{8, 8, 8}));
  // Window [1, 9) puts the set voxel at local index 4.
  EXPECT_EQ(bm.at(4, 4, 4), 1);
  EXPECT_EQ(bm.count(), 1);
  EXPECT_EQ(bv.at(4, 4, 4), 2.0f);
  EXPECT_EQ(bv.at(3, 4, 4), 0.0f);

  EXPECT_THROW(mask_and_crop(big, SegMask(big.dims(), big.spacing()), {8, 8, 8}), ValidationError);
}

TEST(Preprocess, NormalizeIntensity) {
  Volume v({3, 1, 1}, {1, 1, 1}, std::vector<float>{-100.0f, 100.0f, 300.0f});
  const Volume n = normalize_intensity(v);
  EXPECT_EQ(n.data()[0], 0.0f);
  EXPECT_EQ(n.data()[1], 0.5f);
  EXPECT_EQ(n.data()[2], 1.0f);
  EXPECT_EQ(normalize_intensity(n), n);
  const Volume flat = normalize_intensity(Volume({2, 2, 2}, {1, 1, 1}, 7.0f));
  for (float x : flat.data()) EXPECT_EQ(x, 0.0f);
}

TEST(Synth, DeterministicInSeed) {
  const SyntheticPair a = generate_pair(11, {16, 16, 8}, {});
  const SyntheticPair b = generate_pair(11, {16, 16, 8}, {});
  EXPECT_EQ(a.fixed, b.fixed);
  EXPECT_EQ(a.moving, b.moving);
  EXPECT_EQ(a.ground_truth, b.ground_truth);
  EXPECT_EQ(a.fixed_mask, b.fixed_mask);
  const SyntheticPair c = generate_pair(12, {16, 16, 8}, {});
  EXPECT_NE(a.fixed, c.fixed);
}

TEST(Synth, ZeroAmplitudeIsIdentity) {
  SynthConfig cfg;
  cfg.amplitude = 0.0;
  const SyntheticPair p = generate_pair(3, {16, 16, 8}, cfg);
  EXPECT_EQ(p.fixed, p.moving);
  EXPECT_EQ(p.fixed_mask, p.moving_mask);
  for (float x : p.ground_truth.data()) EXPECT_EQ(x, 0.0f);
}

TEST(Synth, DefaultPairsHaveModerateOverlapAndConsistentGroundTruth) {
  const Dims d{32, 32, 16};
  for (std::uint64_t i = 0; i < 6; ++i) {
    const SyntheticPair p = generate_pair(pair_seed(7, i), d, {});
    const double initial = overlap_metrics(p.fixed_mask, p.moving_mask).dice;
    EXPECT_GE(initial, 0.3);
    EXPECT_LE(initial, 0.9);
    const SegMask warped = SegMask::threshold(warp(p.moving_mask.to_volume(), p.ground_truth), 0.5f);
    EXPECT_GE(overlap_metrics(p.fixed_mask, warped).dice, 0.95) << "pair " << i;
    EXPECT_EQ(jacobian_stats(p.ground_truth).nonpos_count, 0);
    for (float x : p.fixed.data()) {
      EXPECT_GE(x, 0.0f);
      EXPECT_LE(x, 1.0f);
    }
  }
}

TEST(Synth, ValidatesConfigAndDims) {
  SynthConfig cfg;
  cfg.max_rotation_deg = 20.0;
  EXPECT_THROW(generate_pair(1, {16, 16, 8}, cfg), ValidationError);
  EXPECT_THROW(generate_pair(1, {16, 16, 4}, {}), ValidationError);
  EXPECT_NE(pair_seed(7, 0), pair_seed(7, 1));
  EXPECT_NE(pair_seed(7, 0), pair_seed(8, 0));
}
