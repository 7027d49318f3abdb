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
#include <vector>

#include "attnreg/error.hpp"
#include "attnreg/losses.hpp"
#include "attnreg/nn/ops.hpp"

namespace attnreg {

namespace {

// Zero-padded box sum of width 2r + 1 along every axis.
void box_sum(std::vector<double>& a, Dims d, int r) {
  std::vector<double> prefix;
  const std::int64_t strides[3] = {1, d.nx, static_cast<std::int64_t>(d.nx) * d.ny};
  for (int axis = 0; axis < 3; ++axis) {
    const int len = d[axis];
    const std::int64_t stride = strides[axis];
    const int u = axis == 0 ? d.ny : d.nx;  // the two other axes, in any order
    const int w = axis == 2 ? d.ny : d.nz;
    const std::int64_t su = axis == 0 ? d.nx : 1;
    const std::int64_t sw = axis == 2 ? d.nx : strides[2];
    prefix.assign(len + 1, 0.0);
    for (int j = 0; j < w; ++j)
      for (int i = 0; i < u; ++i) {
        const std::int64_t base = i * su + j * sw;
        for (int k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + a[base + k * stride];
        for (int k = 0; k < len; ++k) {
          a[base + k * stride] = prefix[std::min(len, k + r + 1)] - prefix[std::max(0, k - r)];
        }
      }
  }
}

// Window sums over in-volume voxels; `count` is how many voxels each window holds.
struct LnccStats {
  std::vector<double> sf, sw, sff, sww, sfw, count;
};

LnccStats window_stats(const double* f, const double* w, Dims d, int r) {
  const std::int64_t n = d.voxels();
  LnccStats s;
  s.sf.assign(f, f + n);
  s.sw.assign(w, w + n);
  s.sff.resize(n);
  s.sww.resize(n);
  s.sfw.resize(n);
  s.count.assign(n, 1.0);
  for (std::int64_t i = 0; i < n; ++i) {
    s.sff[i] = f[i] * f[i];
    s.sww[i] = w[i] * w[i];
    s.sfw[i] = f[i] * w[i];
  }
  for (auto* v : {&s.sf, &s.sw, &s.sff, &s.sww, &s.sfw, &s.count}) box_sum(*v, d, r);
  return s;
}

void check_window(int window) {
  if (window < 1 || window % 2 == 0) throw ValidationError("LNCC window must be odd and positive");
}

double lncc_value(const double* f, const double* w, Dims d, int window, double eps) {
  const auto s = window_stats(f, w, d, window / 2);
  double total = 0.0;
  for (std::int64_t i = 0; i < d.voxels(); ++i) {
    const double count = s.count[i];
    const double cross = s.sfw[i] - s.sf[i] * s.sw[i] / count;
    const double fv = s.sff[i] - s.sf[i] * s.sf[i] / count;
    const double wv = s.sww[i] - s.sw[i] * s.sw[i] / count;
    total += cross * cross / (fv * wv + eps);
  }
  return total / static_cast<double>(d.voxels());
}

// Accumulates scale * d(lncc)/d(f) and d(lncc)/d(w).
void lncc_grad(const double* f, const double* w, Dims d, int window, double eps, double scale, double* gf,
               double* gw) {
  const std::int64_t n = d.voxels();
  const auto s = window_stats(f, w, d, window / 2);
  std::vector<double> a_fw(n), a_ff(n), a_ww(n), a_f(n), a_w(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double count = s.count[i];
    const double cross = s.sfw[i] - s.sf[i] * s.sw[i] / count;
    const double fv = s.sff[i] - s.sf[i] * s.sf[i] / count;
    const double wv = s.sww[i] - s.sw[i] * s.sw[i] / count;
    const double den = fv * wv + eps;
    a_fw[i] = 2.0 * cross / den;
    a_ff[i] = -cross * cross * wv / (den * den);
    a_ww[i] = -cross * cross * fv / (den * den);
    a_f[i] = -a_fw[i] * s.sw[i] / count - 2.0 * a_ff[i] * s.sf[i] / count;
    a_w[i] = -a_fw[i] * s.sf[i] / count - 2.0 * a_ww[i] * s.sw[i] / count;
  }
  const int r = window / 2;
  for (auto* v : {&a_fw, &a_ff, &a_ww, &a_f, &a_w}) box_sum(*v, d, r);
  const double k = scale / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    if (gf) gf[i] += k * (a_f[i] + 2.0 * f[i] * a_ff[i] + w[i] * a_fw[i]);
    if (gw) gw[i] += k * (a_w[i] + 2.0 * w[i] * a_ww[i] + f[i] * a_fw[i]);
  }
}

}  // namespace

double lncc(const Volume& f, const Volume& w, int window, double eps) {
  require_same_grid(f.dims(), w.dims(), "lncc");
  check_window(window);
  std::vector<double> fd(f.data().begin(), f.data().end());
  std::vector<double> wd(w.data().begin(), w.data().end());
  return lncc_value(fd.data(), wd.data(), f.dims(), window, eps);
}

std::pair<double, double> similarity_losses(const Volume& f, const Volume& m_a, const Volume& m_d, int window,
                                            double eps) {
  return {-lncc(f, m_a, window, eps), -lncc(f, m_d, window, eps)};
}

namespace losses {

template <typename T>
nn::Var<T> lncc(const nn::Var<T>& f, const nn::Var<T>& w, int window, T eps) {
  if (f.shape() != w.shape() || f.shape().size() != 5) {
    throw ValidationError("lncc: shape mismatch " + nn::shape_str(f.shape()) + " vs " + nn::shape_str(w.shape()));
  }
  check_window(window);
  const Dims d = nn::spatial_dims(f.shape());
  const std::int64_t planes = f.shape()[0] * f.shape()[1];
  const std::int64_t v = d.voxels();
  std::vector<double> fd(f.value().vec().begin(), f.value().vec().end());
  std::vector<double> wd(w.value().vec().begin(), w.value().vec().end());
  double total = 0.0;
  for (std::int64_t p = 0; p < planes; ++p) {
    total += lncc_value(fd.data() + p * v, wd.data() + p * v, d, window, eps);
  }
  total /= static_cast<double>(planes);
  return nn::make_result<T>(
      nn::Tensor<T>({1}, static_cast<T>(total)), {f, w},
      [=, fd = std::move(fd), wd = std::move(wd)](nn::Node<T>& self) {
        auto* gfo = nn::grad_of(self, 0);
        auto* gwo = nn::grad_of(self, 1);
        std::vector<double> gf(gfo ? fd.size() : 0), gw(gwo ? wd.size() : 0);
        const double scale = static_cast<double>(self.grad[0]) / static_cast<double>(planes);
        for (std::int64_t p = 0; p < planes; ++p) {
          lncc_grad(fd.data() + p * v, wd.data() + p * v, d, window, eps, scale,
                    gfo ? gf.data() + p * v : nullptr, gwo ? gw.data() + p * v : nullptr);
        }
        if (gfo)
          for (std::size_t i = 0; i < gf.size(); ++i) (*gfo)[i] += static_cast<T>(gf[i]);
        if (gwo)
          for (std::size_t i = 0; i < gw.size(); ++i) (*gwo)[i] += static_cast<T>(gw[i]);
      });
}

template nn::Var<float> lncc(const nn::Var<float>&, const nn::Var<float>&, int, float);
template nn::Var<double> lncc(const nn::Var<double>&, const nn::Var<double>&, int, double);

}  // namespace losses

}  // namespace attnreg
