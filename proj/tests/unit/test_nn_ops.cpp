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
#include <random>

#include "attnreg/error.hpp"
#include "attnreg/nn/ops.hpp"
#include "grad_check.hpp"

using namespace attnreg;
using namespace attnreg::nn;
using testutil::check_param;
using testutil::random_tensor;

namespace {

oracle::FiniteDiffSpec spec64() {
  oracle::FiniteDiffSpec s;
  s.h = 1e-6;
  s.tolerance = 1e-4;
  return s;
}

// Contracts an op output with fixed random weights so every element matters.
Var<double> probe_sum(const Var<double>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var<double> w(random_tensor<double>(out.shape(), rng));
  return sum(mul(out, w));
}

void expect_grads(const std::function<Var<double>()>& loss, std::vector<Var<double>> params, int count = 40) {
  std::mt19937_64 rng(99);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto r = check_param(loss, params[i], count, rng, spec64());
    EXPECT_EQ(r.failures, 0) << "param " << i << ": " << r.first_failure << " max_rel " << r.max_rel;
  }
}

}  // namespace

TEST(NnOps, ElementwiseAndStructuralGradients) {
  std::mt19937_64 rng(1);
  Var<double> a(random_tensor<double>({2, 3, 4}, rng), true);
  Var<double> b(random_tensor<double>({2, 3, 4}, rng), true);
  Var<double> c(random_tensor<double>({2, 5, 4}, rng), true);
  expect_grads([&] { return probe_sum(mul(add(a, b), sub(a, scale(b, 0.5))), 3); }, {a, b});
  expect_grads([&] { return probe_sum(concat<double>({a, c, b}, 1), 4); }, {a, b, c});
  expect_grads([&] { return probe_sum(slice(c, 1, 1, 3), 5); }, {c});
  expect_grads([&] { return probe_sum(transpose_last2(reshape(c, {2, 4, 5})), 6); }, {c});
  expect_grads([&] { return probe_sum(gelu(a), 7); }, {a});
  expect_grads([&] { return probe_sum(sigmoid(a), 8); }, {a});
  expect_grads([&] { return probe_sum(leaky_relu(a, 0.2), 9); }, {a});
  expect_grads([&] { return mean(mul(a, a)); }, {a});
}

TEST(NnOps, ConcatAndSliceAreInverse) {
  std::mt19937_64 rng(2);
  Var<float> a(random_tensor<float>({2, 3, 4}, rng));
  Var<float> b(random_tensor<float>({2, 2, 4}, rng));
  auto ab = concat<float>({a, b}, 1);
  EXPECT_EQ(slice(ab, 1, 0, 3).value(), a.value());
  EXPECT_EQ(slice(ab, 1, 3, 2).value(), b.value());
}

TEST(NnOps, LinearAndLayerNormGradients) {
  std::mt19937_64 rng(3);
  Var<double> x(random_tensor<double>({2, 3, 6}, rng), true);
  Var<double> w(random_tensor<double>({6, 5}, rng), true);
  Var<double> bias(random_tensor<double>({5}, rng), true);
  expect_grads([&] { return probe_sum(linear(x, w, bias), 10); }, {x, w, bias});
  Var<double> g(random_tensor<double>({6}, rng, 0.5, 1.5), true);
  Var<double> be(random_tensor<double>({6}, rng), true);
  expect_grads([&] { return probe_sum(layer_norm(x, g, be, 1e-5), 11); }, {x, g, be});
}

TEST(NnOps, LayerNormNormalizesRows) {
  std::mt19937_64 rng(4);
  Var<double> x(random_tensor<double>({3, 8}, rng, -5, 5));
  Var<double> g(Tensor<double>({8}, 1.0)), b(Tensor<double>({8}, 0.0));
  auto y = layer_norm(x, g, b, 0.0);
  for (int r = 0; r < 3; ++r) {
    double m = 0, v = 0;
    for (int j = 0; j < 8; ++j) m += y.value()[r * 8 + j];
    m /= 8;
    for (int j = 0; j < 8; ++j) v += std::pow(y.value()[r * 8 + j] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 8, 1.0, 1e-12);
  }
}

TEST(NnOps, PositionAddGradients) {
  std::mt19937_64 rng(5);
  Var<double> x(random_tensor<double>({2, 3, 4}, rng), true);
  Var<double> table(random_tensor<double>({8, 4}, rng), true);
  expect_grads([&] { return probe_sum(add_position(x, table, 2), 12); }, {x, table});
  EXPECT_THROW(add_position(x, table, 6), ValidationError);
}

TEST(NnOps, ConvMatchesDirectSum) {
  std::mt19937_64 rng(6);
  for (int stride : {1, 2}) {
    Var<double> x(random_tensor<double>({2, 3, 5, 4, 7}, rng));
    Var<double> w(random_tensor<double>({4, 3, 3, 3, 3}, rng));
    Var<double> b(random_tensor<double>({4}, rng));
    auto y = conv3d(x, w, b, stride);
    const int oz = (5 - 1) / stride + 1, oy = (4 - 1) / stride + 1, ox = (7 - 1) / stride + 1;
    ASSERT_EQ(y.shape(), (Shape{2, 4, oz, oy, ox}));
    for (int n = 0; n < 2; ++n)
      for (int co = 0; co < 4; ++co)
        for (int z = 0; z < oz; ++z)
          for (int yy = 0; yy < oy; ++yy)
            for (int xx = 0; xx < ox; ++xx) {
              double acc = b.value()[co];
              for (int ci = 0; ci < 3; ++ci)
                for (int kz = 0; kz < 3; ++kz)
                  for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                      const int iz = z * stride + kz - 1, iy = yy * stride + ky - 1, ix = xx * stride + kx - 1;
                      if (iz < 0 || iy < 0 || ix < 0 || iz >= 5 || iy >= 4 || ix >= 7) continue;
                      acc += w.value()[(((co * 3 + ci) * 3 + kz) * 3 + ky) * 3 + kx] *
                             x.value()[(((n * 3 + ci) * 5 + iz) * 4 + iy) * 7 + ix];
                    }
              EXPECT_NEAR(y.value()[(((n * 4 + co) * oz + z) * oy + yy) * ox + xx], acc, 1e-12);
            }
  }
}

TEST(NnOps, ConvAndBatchNormGradients) {
  std::mt19937_64 rng(7);
  Var<double> x(random_tensor<double>({2, 2, 3, 4, 5}, rng), true);
  Var<double> w(random_tensor<double>({3, 2, 3, 3, 3}, rng), true);
  Var<double> b(random_tensor<double>({3}, rng), true);
  expect_grads([&] { return probe_sum(conv3d(x, w, b, 1), 13); }, {x, w, b});
  expect_grads([&] { return probe_sum(conv3d(x, w, b, 2), 14); }, {x, w, b});

  Var<double> g(random_tensor<double>({2}, rng, 0.5, 1.5), true);
  Var<double> be(random_tensor<double>({2}, rng), true);
  BatchNormState<double> st{Tensor<double>({2}, 0.1), Tensor<double>({2}, 2.0)};
  expect_grads([&] { return probe_sum(batch_norm(x, g, be, st, true, 0.1, 1e-5), 15); }, {x, g, be});
  expect_grads([&] { return probe_sum(batch_norm(x, g, be, st, false, 0.1, 1e-5), 16); }, {x, g, be});
}

TEST(NnOps, BatchNormRunningStatistics) {
  Var<double> x(Tensor<double>({2, 1, 1, 1, 2}, {1.0, 2.0, 3.0, 4.0}));
  Var<double> g(Tensor<double>({1}, 1.0)), b(Tensor<double>({1}, 0.0));
  BatchNormState<double> st{Tensor<double>({1}, 0.0), Tensor<double>({1}, 1.0)};
  batch_norm(x, g, b, st, true, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(st.running_mean[0], 1.25);
  // unbiased variance of {1,2,3,4} is 5/3
  EXPECT_DOUBLE_EQ(st.running_var[0], 0.5 + 0.5 * 5.0 / 3.0);
  auto y = batch_norm(x, g, b, st, false, 0.5, 0.0);
  EXPECT_NEAR(y.value()[0], (1.0 - 1.25) / std::sqrt(st.running_var[0]), 1e-15);
}

TEST(NnOps, UpsampleAndPoolGradients) {
  std::mt19937_64 rng(8);
  Var<double> x(random_tensor<double>({2, 2, 2, 3, 2}, rng), true);
  expect_grads([&] { return probe_sum(upsample_nearest(x, Dims{4, 5, 3}), 17); }, {x});
  expect_grads([&] { return probe_sum(global_avg_pool(x), 18); }, {x});
}

TEST(NnOps, AttentionMatchesOracle) {
  std::mt19937_64 rng(9);
  const int len = 4, dim = 8, heads = 2;
  Var<double> e(random_tensor<double>({1, len, dim}, rng));
  Var<double> wq(random_tensor<double>({dim, dim}, rng)), wk(random_tensor<double>({dim, dim}, rng)),
      wv(random_tensor<double>({dim, dim}, rng));
  Var<double> none;
  auto out = attention(linear(e, wq, none), linear(e, wk, none), linear(e, wv, none), heads,
                       1.0 / std::sqrt(4.0));
  auto ref = oracle::attention(e.value().span(), len, dim, wq.value().span(), {}, wk.value().span(), {},
                               wv.value().span(), {}, heads, oracle::AttentionScaling::per_head);
  for (int i = 0; i < len * dim; ++i) EXPECT_NEAR(out.value()[i], ref[i], 1e-12);
}

TEST(NnOps, AttentionSingleTokenReturnsValue) {
  std::mt19937_64 rng(10);
  Var<float> q(random_tensor<float>({1, 1, 6}, rng)), k(random_tensor<float>({1, 1, 6}, rng)),
      v(random_tensor<float>({1, 1, 6}, rng));
  auto out = attention(q, k, v, 3, 0.5f);
  EXPECT_EQ(out.value(), v.value());
}

TEST(NnOps, AttentionZeroQueriesAverageValues) {
  std::mt19937_64 rng(11);
  Var<double> q(Tensor<double>({2, 5, 4}, 0.0)), k(random_tensor<double>({2, 5, 4}, rng)),
      v(random_tensor<double>({2, 5, 4}, rng));
  AttentionProbe<double> probe;
  auto out = attention(q, k, v, 2, 0.7, &probe);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 4; ++c) {
      double m = 0;
      for (int j = 0; j < 5; ++j) m += v.value()[(b * 5 + j) * 4 + c];
      for (int i = 0; i < 5; ++i) EXPECT_NEAR(out.value()[(b * 5 + i) * 4 + c], m / 5, 1e-12);
    }
  ASSERT_EQ(probe.probabilities.size(), 1u);
  for (double p : probe.probabilities[0].span()) EXPECT_NEAR(p, 0.2, 1e-15);
}

TEST(NnOps, AttentionGradients) {
  std::mt19937_64 rng(12);
  Var<double> q(random_tensor<double>({2, 5, 6}, rng), true), k(random_tensor<double>({2, 5, 6}, rng), true),
      v(random_tensor<double>({2, 5, 6}, rng), true);
  expect_grads([&] { return probe_sum(attention(q, k, v, 3, 0.6), 19); }, {q, k, v});
}

TEST(NnOps, FieldOpGradients) {
  std::mt19937_64 rng(13);
  const Dims d{5, 4, 3};
  Var<double> img(random_tensor<double>({2, 2, 3, 4, 5}, rng), true);
  // Non-integer displacements keep every sample away from interpolation kinks.
  Var<double> disp(random_tensor<double>({2, 3, 3, 4, 5}, rng, -1.3, 1.3), true);
  expect_grads([&] { return probe_sum(warp(img, disp), 20); }, {img, disp});

  Var<double> params(random_tensor<double>({2, 12}, rng, -0.2, 0.2), true);
  expect_grads([&] { return probe_sum(affine_displacement(params, d), 21); }, {params});

  Var<double> vel(random_tensor<double>({1, 3, 3, 4, 5}, rng, -0.7, 0.7), true);
  expect_grads([&] { return probe_sum(exponentiate(vel, 3), 22); }, {vel});
}

TEST(NnOps, NoGradGuardSkipsRecording) {
  Var<float> a(Tensor<float>({2}, 1.0f), true);
  NoGradGuard guard;
  auto b = add(a, a);
  EXPECT_FALSE(b.requires_grad());
}
