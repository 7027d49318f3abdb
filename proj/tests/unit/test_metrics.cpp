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

#include <random>

#include "attnreg/error.hpp"
#include "attnreg/metrics.hpp"
#include "test_helpers.hpp"

using namespace attnreg;

namespace {

double oracle_assd(const SegMask& a, const SegMask& b) {
  return oracle::assd(a.data(), b.data(), testutil::grid(a.dims()), a.spacing());
}

}  // namespace

TEST(Overlap, CountsAndConvention) {
  const Dims d{4, 2, 1};
  const SegMask f(d, {1, 1, 1}, {1, 1, 1, 1, 0, 0, 0, 0});
  const SegMask w(d, {1, 1, 1}, {1, 1, 0, 0, 1, 1, 1, 1});
  const Overlap o = overlap_metrics(f, w);
  EXPECT_DOUBLE_EQ(o.dice, 2.0 * 2 / (4 + 6));
  EXPECT_DOUBLE_EQ(o.prec, 2.0 / 6);
  EXPECT_DOUBLE_EQ(o.rec, 2.0 / 4);
  const Overlap swapped = overlap_metrics(w, f);
  EXPECT_DOUBLE_EQ(o.prec, swapped.rec);
  EXPECT_DOUBLE_EQ(o.dice, swapped.dice);
  EXPECT_FALSE(o.empty_denominator);
  EXPECT_TRUE(overlap_metrics(SegMask(d, {1, 1, 1}), SegMask(d, {1, 1, 1})).empty_denominator);
}

TEST(Surface, InteriorVoxelsAreExcluded) {
  SegMask cube({5, 5, 5}, {1, 1, 1});
  for (int z = 0; z < 5; ++z)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) cube.at(x, y, z) = 1;
  const SegMask s = surface(cube);
  EXPECT_EQ(s.count(), 125 - 27);
  EXPECT_EQ(s.at(2, 2, 2), 0);
  EXPECT_EQ(s.at(0, 2, 2), 1);
}

TEST(Assd, MatchesPairwiseOracleExactly) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    const Dims d{16, 16, 16};
    const SegMask a = testutil::random_mask(d, rng, 0.2);
    const SegMask b = testutil::random_mask(d, rng, 0.05);
    EXPECT_EQ(assd(a, b, a.spacing()), oracle_assd(a, b));
  }
}

TEST(Assd, AnisotropicSpacingMatchesOracle) {
  std::mt19937_64 rng(2);
  const Spacing sp{0.5, 1.0, 2.0};
  for (int t = 0; t < 5; ++t) {
    const SegMask a = testutil::random_mask({9, 8, 7}, rng, 0.1, sp);
    const SegMask b = testutil::random_mask({9, 8, 7}, rng, 0.1, sp);
    EXPECT_NEAR(assd(a, b, sp), oracle_assd(a, b), 1e-12);
  }
}

TEST(Assd, SymmetricAndZeroOnIdentity) {
  std::mt19937_64 rng(3);
  const SegMask a = testutil::random_mask({10, 10, 10}, rng, 0.3);
  const SegMask b = testutil::random_mask({10, 10, 10}, rng, 0.3);
  EXPECT_EQ(assd(a, a, a.spacing()), 0.0);
  EXPECT_EQ(assd(a, b, a.spacing()), assd(b, a, a.spacing()));
  EXPECT_THROW(assd(a, SegMask(a.dims(), a.spacing()), a.spacing()), ValidationError);
}

TEST(Assd, ShiftedSlabs) {
  // Two 1-voxel slabs two voxels apart: every surface voxel is 2 mm from the other.
  SegMask a({6, 6, 6}, {1, 1, 1}), b({6, 6, 6}, {1, 1, 1});
  for (int z = 0; z < 6; ++z)
    for (int y = 0; y < 6; ++y) {
      a.at(1, y, z) = 1;
      b.at(3, y, z) = 1;
    }
  EXPECT_DOUBLE_EQ(assd(a, b, a.spacing()), 2.0);
}

TEST(Evaluate, IdentityChainsReproduceInitialMetrics) {
  std::mt19937_64 rng(4);
  const Dims d{12, 10, 8};
  const SegMask f = testutil::random_mask(d, rng, 0.4);
  const SegMask m = testutil::random_mask(d, rng, 0.4);
  const EvalReport init = evaluate_stage(f, m, {}, Stage::initial);
  const Overlap o = overlap_metrics(f, m);
  EXPECT_EQ(init.dice, o.dice);
  EXPECT_EQ(init.assd_mm, assd(f, m, f.spacing()));
  EXPECT_FALSE(init.jac.has_value());
  const EvalReport aff = evaluate_stage(f, m, {AffineParams::identity(), std::nullopt}, Stage::affine);
  const EvalReport fin =
      evaluate_stage(f, m, {AffineParams::identity(), VectorField(d, FieldKind::displacement)}, Stage::final);
  for (const EvalReport* r : {&aff, &fin}) {
    EXPECT_EQ(r->dice, init.dice);
    EXPECT_EQ(r->prec, init.prec);
    EXPECT_EQ(r->rec, init.rec);
    EXPECT_EQ(r->assd_mm, init.assd_mm);
  }
  ASSERT_TRUE(fin.jac.has_value());
  EXPECT_EQ(fin.jac->nonpos_count, 0);
  EXPECT_EQ(stage_name(Stage::final), "final");
}

TEST(Evaluate, ChainMustMatchStage) {
  const Dims d{6, 6, 6};
  const SegMask f(d, {1, 1, 1}, std::vector<std::uint8_t>(216, 1));
  EXPECT_THROW(evaluate_stage(f, f, {}, Stage::final), ValidationError);
  EXPECT_THROW(evaluate_stage(f, f, {AffineParams::identity(), std::nullopt}, Stage::initial), ValidationError);
}

TEST(Evaluate, TranslationChainUsesNearestNeighbour) {
  SegMask f({8, 8, 8}, {1, 1, 1}), m({8, 8, 8}, {1, 1, 1});
  for (int z = 2; z < 6; ++z)
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) {
        f.at(x, y, z) = 1;
        m.at(x + 1, y, z) = 1;
      }
  VectorField phi({8, 8, 8}, FieldKind::displacement);
  for (auto& x : phi.channel(0)) x = 1.0f;  // sample moving one voxel to the right
  const EvalReport r = evaluate_stage(f, m, {AffineParams::identity(), phi}, Stage::final);
  EXPECT_DOUBLE_EQ(r.dice, 1.0);
  EXPECT_DOUBLE_EQ(r.assd_mm, 0.0);
}
