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
#include <string>

#include "attnreg/error.hpp"
#include "attnreg/losses.hpp"
#include "attnreg/nn/ops.hpp"

namespace attnreg {

void LossWeights::validate() const {
  const double ws[] = {lambda_a, lambda_d, lambda_smooth, lambda_a_seg, lambda_d_seg};
  for (double w : ws) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("loss weights must be finite and non-negative");
  }
  if (window < 1 || window % 2 == 0) throw ValidationError("LNCC window must be odd and positive");
  if (!(epsilon > 0.0)) throw ValidationError("loss epsilon must be positive");
}

namespace {

// Sum over axes of the mean squared forward difference (all channels).
template <typename T>
double smoothness_value(const T* u, Dims d, int channels) {
  const std::int64_t v = d.voxels();
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  double total = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] < 2) throw ValidationError("smoothness needs at least two voxels per axis");
    const double count = static_cast<double>(v / d[axis] * (d[axis] - 1));
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const T* p = u + c * v;
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
          for (int x = 0; x < d.nx; ++x) {
            const int coord = axis == 0 ? x : axis == 1 ? y : z;
            if (coord + 1 >= d[axis]) continue;
            const std::int64_t i = d.index(x, y, z);
            const double diff = static_cast<double>(p[i + strides[axis]]) - static_cast<double>(p[i]);
            acc += diff * diff;
          }
    }
    total += acc / count;
  }
  return total;
}

template <typename T>
void smoothness_grad(const T* u, Dims d, int channels, double scale, T* g) {
  const std::int64_t v = d.voxels();
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  for (int axis = 0; axis < 3; ++axis) {
    const double k = 2.0 * scale / static_cast<double>(v / d[axis] * (d[axis] - 1));
    for (int c = 0; c < channels; ++c) {
      const T* p = u + c * v;
      T* gp = g + c * v;
      for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
          for (int x = 0; x < d.nx; ++x) {
            const int coord = axis == 0 ? x : axis == 1 ? y : z;
            if (coord + 1 >= d[axis]) continue;
            const std::int64_t i = d.index(x, y, z);
            const double diff = static_cast<double>(p[i + strides[axis]]) - static_cast<double>(p[i]);
            gp[i + strides[axis]] += static_cast<T>(k * diff);
            gp[i] -= static_cast<T>(k * diff);
          }
    }
  }
}

struct DiceSums {
  double inter = 0.0, sf = 0.0, sw = 0.0;
};

template <typename F, typename W>
DiceSums dice_sums(const F* f, const W* w, std::int64_t n) {
  DiceSums s;
  for (std::int64_t i = 0; i < n; ++i) {
    const double a = static_cast<double>(f[i]), b = static_cast<double>(w[i]);
    s.inter += a * b;
    s.sf += a;
    s.sw += b;
  }
  return s;
}

}  // namespace

double smoothness(const VectorField& u) {
  return smoothness_value(u.data().data(), u.dims(), 3);
}

double soft_dice_loss(const SegMask& f_seg, const Volume& w_seg, double eps) {
  require_same_grid(f_seg.dims(), w_seg.dims(), "soft_dice_loss");
  const auto s = dice_sums(f_seg.data().data(), w_seg.data().data(), f_seg.dims().voxels());
  return 1.0 - (2.0 * s.inter + eps) / (s.sf + s.sw + eps);
}

LossBreakdown total_loss(const LossParts& p, const LossWeights& w, bool masks_available) {
  const std::pair<const char*, double> named[] = {
      {"l_a", p.l_a}, {"l_d", p.l_d}, {"l_smooth", p.l_smooth}, {"l_a_seg", p.l_a_seg}, {"l_d_seg", p.l_d_seg}};
  for (const auto& [name, value] : named) {
    const bool is_seg = name == std::string("l_a_seg") || name == std::string("l_d_seg");
    if (is_seg && !masks_available) continue;
    if (!std::isfinite(value)) throw NumericError(std::string("non-finite loss term ") + name);
  }
  LossBreakdown b{p.l_a, p.l_d, p.l_smooth, 0.0, 0.0, 0.0};
  b.total = w.lambda_a * p.l_a + w.lambda_d * p.l_d + w.lambda_smooth * p.l_smooth;
  if (masks_available) {
    b.l_a_seg = p.l_a_seg;
    b.l_d_seg = p.l_d_seg;
    b.total += w.lambda_a_seg * p.l_a_seg + w.lambda_d_seg * p.l_d_seg;
  }
  return b;
}

namespace losses {

template <typename T>
nn::Var<T> smoothness(const nn::Var<T>& u) {
  if (u.shape().size() != 5) throw ValidationError("smoothness expects [N, C, nz, ny, nx]");
  const Dims d = nn::spatial_dims(u.shape());
  const std::int64_t batch = u.shape()[0];
  const int channels = static_cast<int>(u.shape()[1]);
  const std::int64_t stride = channels * d.voxels();
  double total = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) total += smoothness_value(u.value().data() + b * stride, d, channels);
  total /= static_cast<double>(batch);
  return nn::make_result<T>(nn::Tensor<T>({1}, static_cast<T>(total)), {u}, [=](nn::Node<T>& self) {
    auto* g = nn::grad_of(self, 0);
    if (!g) return;
    const double scale = static_cast<double>(self.grad[0]) / static_cast<double>(batch);
    const T* uv = self.parents[0]->value.data();
    for (std::int64_t b = 0; b < batch; ++b) smoothness_grad(uv + b * stride, d, channels, scale, g->data() + b * stride);
  });
}

template <typename T>
nn::Var<T> soft_dice_loss(const nn::Var<T>& f, const nn::Var<T>& w, T eps) {
  if (f.shape() != w.shape() || f.shape().empty()) {
    throw ValidationError("soft_dice_loss: shape mismatch " + nn::shape_str(f.shape()) + " vs " +
                          nn::shape_str(w.shape()));
  }
  const std::int64_t batch = f.shape()[0];
  const std::int64_t per = f.value().size() / batch;
  std::vector<DiceSums> sums(batch);
  double total = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    sums[b] = dice_sums(f.value().data() + b * per, w.value().data() + b * per, per);
    total += 1.0 - (2.0 * sums[b].inter + eps) / (sums[b].sf + sums[b].sw + eps);
  }
  total /= static_cast<double>(batch);
  return nn::make_result<T>(nn::Tensor<T>({1}, static_cast<T>(total)), {f, w}, [=](nn::Node<T>& self) {
    const double up = static_cast<double>(self.grad[0]) / static_cast<double>(batch);
    const T* fv = self.parents[0]->value.data();
    const T* wv = self.parents[1]->value.data();
    auto* gf = nn::grad_of(self, 0);
    auto* gw = nn::grad_of(self, 1);
    for (std::int64_t b = 0; b < batch; ++b) {
      const double num = 2.0 * sums[b].inter + eps;
      const double den = sums[b].sf + sums[b].sw + eps;
      for (std::int64_t i = b * per; i < (b + 1) * per; ++i) {
        if (gw) (*gw)[i] += static_cast<T>(-up * (2.0 * fv[i] * den - num) / (den * den));
        if (gf) (*gf)[i] += static_cast<T>(-up * (2.0 * wv[i] * den - num) / (den * den));
      }
    }
  });
}

template <typename T>
Objective<T> objective(nn::Var<T> l_a, nn::Var<T> l_d, nn::Var<T> l_smooth, nn::Var<T> l_a_seg,
                       nn::Var<T> l_d_seg, const LossWeights& weights, bool masks_available) {
  if (!masks_available) {
    l_a_seg = nn::Var<T>();
    l_d_seg = nn::Var<T>();
  } else if (!l_a_seg || !l_d_seg) {
    throw ValidationError("segmentation loss terms missing while masks are available");
  }
  auto scalar = [](const nn::Var<T>& v) { return v ? static_cast<double>(v.value()[0]) : 0.0; };
  LossParts parts{scalar(l_a), scalar(l_d), scalar(l_smooth), scalar(l_a_seg), scalar(l_d_seg)};
  Objective<T> o;
  o.breakdown = total_loss(parts, weights, masks_available);
  o.total = nn::weighted_sum<T>(
      {l_a, l_d, l_smooth, l_a_seg, l_d_seg},
      {static_cast<T>(weights.lambda_a), static_cast<T>(weights.lambda_d), static_cast<T>(weights.lambda_smooth),
       static_cast<T>(weights.lambda_a_seg), static_cast<T>(weights.lambda_d_seg)});
  o.l_a = std::move(l_a);
  o.l_d = std::move(l_d);
  o.l_smooth = std::move(l_smooth);
  o.l_a_seg = std::move(l_a_seg);
  o.l_d_seg = std::move(l_d_seg);
  return o;
}

#define ATTNREG_INSTANTIATE(T)                                                                          \
  template nn::Var<T> smoothness(const nn::Var<T>&);                                                    \
  template nn::Var<T> soft_dice_loss(const nn::Var<T>&, const nn::Var<T>&, T);                          \
  template Objective<T> objective(nn::Var<T>, nn::Var<T>, nn::Var<T>, nn::Var<T>, nn::Var<T>,           \
                                  const LossWeights&, bool);
ATTNREG_INSTANTIATE(float)
ATTNREG_INSTANTIATE(double)
#undef ATTNREG_INSTANTIATE

}  // namespace losses

}  // namespace attnreg
