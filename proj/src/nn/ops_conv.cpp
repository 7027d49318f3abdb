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

#include <Eigen/Dense>

#include "attnreg/error.hpp"
#include "attnreg/nn/ops.hpp"

namespace attnreg::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

Dims conv_out_dims(Dims in, int stride) {
  return Dims{(in.nx - 1) / stride + 1, (in.ny - 1) / stride + 1, (in.nz - 1) / stride + 1};
}

// Valid output x range [lo, hi) for kernel tap kx.
inline void x_range(int kx, int stride, Dims in, Dims out, int& lo, int& hi) {
  lo = kx == 0 ? 1 : 0;
  const int span = in.nx - kx;
  hi = span < 0 ? 0 : std::min(out.nx, span / stride + 1);
  lo = std::min(lo, hi);
}

// Columns for output rows [r0, r1) where row = oz * out.ny + oy:
// col[(c * 27 + k), j] = x[c, tap k of output voxel j] with zero padding.
template <typename T>
void im2col(const T* x, std::int64_t channels, Dims in, Dims out, int stride, int r0, int r1, T* col) {
  const std::int64_t vin = in.voxels();
  const std::int64_t cols = static_cast<std::int64_t>(r1 - r0) * out.nx;
  for (std::int64_t c = 0; c < channels; ++c) {
    const T* xc = x + c * vin;
    for (int kz = 0; kz < 3; ++kz)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = col + (((c * 3 + kz) * 3 + ky) * 3 + kx) * cols;
          int lo, hi;
          x_range(kx, stride, in, out, lo, hi);
          for (int r = r0; r < r1; ++r) {
            const int oz = r / out.ny, oy = r % out.ny;
            const int iz = oz * stride + kz - 1, iy = oy * stride + ky - 1;
            T* row = dst + static_cast<std::int64_t>(r - r0) * out.nx;
            if (iz < 0 || iz >= in.nz || iy < 0 || iy >= in.ny) {
              std::fill_n(row, out.nx, T(0));
              continue;
            }
            const T* src = xc + (static_cast<std::int64_t>(iz) * in.ny + iy) * in.nx + kx - 1;
            std::fill(row, row + lo, T(0));
            if (stride == 1) {
              std::copy(src + lo, src + hi, row + lo);
            } else {
              for (int ox = lo; ox < hi; ++ox) row[ox] = src[ox * 2];
            }
            std::fill(row + hi, row + out.nx, T(0));
          }
        }
  }
}

template <typename T>
void col2im(const T* col, std::int64_t channels, Dims in, Dims out, int stride, int r0, int r1, T* gx) {
  const std::int64_t vin = in.voxels();
  const std::int64_t cols = static_cast<std::int64_t>(r1 - r0) * out.nx;
  for (std::int64_t c = 0; c < channels; ++c) {
    T* gc = gx + c * vin;
    for (int kz = 0; kz < 3; ++kz)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = col + (((c * 3 + kz) * 3 + ky) * 3 + kx) * cols;
          int lo, hi;
          x_range(kx, stride, in, out, lo, hi);
          for (int r = r0; r < r1; ++r) {
            const int oz = r / out.ny, oy = r % out.ny;
            const int iz = oz * stride + kz - 1, iy = oy * stride + ky - 1;
            if (iz < 0 || iz >= in.nz || iy < 0 || iy >= in.ny) continue;
            const T* row = src + static_cast<std::int64_t>(r - r0) * out.nx;
            T* dst = gc + (static_cast<std::int64_t>(iz) * in.ny + iy) * in.nx + kx - 1;
            if (stride == 1) {
              for (int ox = lo; ox < hi; ++ox) dst[ox] += row[ox];
            } else {
              for (int ox = lo; ox < hi; ++ox) dst[ox * 2] += row[ox];
            }
          }
        }
  }
}

// Output rows per tile so one column tile stays cache resident.
int tile_rows(std::int64_t kdim, Dims out) {
  constexpr std::int64_t kBudget = 1 << 17;  // elements
  const std::int64_t cols = std::max<std::int64_t>(kBudget / kdim, 64);
  return static_cast<int>(std::clamp<std::int64_t>(cols / out.nx, 1, static_cast<std::int64_t>(out.ny) * out.nz));
}

}  // namespace

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 5 || ws.size() != 5 || ws[1] != xs[1] || ws[2] != 3 || ws[3] != 3 || ws[4] != 3) {
    throw ValidationError("conv3d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  }
  if (stride != 1 && stride != 2) throw ValidationError("conv3d: stride must be 1 or 2");
  const std::int64_t n = xs[0], cin = xs[1], cout = ws[0];
  const Dims in = spatial_dims(xs);
  const Dims od = conv_out_dims(in, stride);
  const std::int64_t kdim = cin * 27, vin = in.voxels(), vout = od.voxels();
  const int rows = od.ny * od.nz;
  const int tile = tile_rows(kdim, od);
  const bool has_bias = static_cast<bool>(b);

  Tensor<T> out({n, cout, od.nz, od.ny, od.nx});
  std::vector<T> col(static_cast<std::size_t>(kdim * tile * od.nx));
  CMapMat<T> wm(w.value().data(), cout, kdim);
  for (std::int64_t s = 0; s < n; ++s) {
    for (int r0 = 0; r0 < rows; r0 += tile) {
      const int r1 = std::min(rows, r0 + tile);
      const std::int64_t cols = static_cast<std::int64_t>(r1 - r0) * od.nx;
      im2col(x.value().data() + s * cin * vin, cin, in, od, stride, r0, r1, col.data());
      StridedMap<T> y(out.data() + s * cout * vout + static_cast<std::int64_t>(r0) * od.nx, cout, cols,
                      Eigen::OuterStride<>(vout));
      y.noalias() = wm * CMapMat<T>(col.data(), kdim, cols);
      if (has_bias) {
        y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.value().data(), cout);
      }
    }
  }

  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [=](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    auto* gw = grad_of(self, 1);
    auto* gb = has_bias ? grad_of(self, 2) : nullptr;
    const T* xv = self.parents[0]->value.data();
    CMapMat<T> wm(self.parents[1]->value.data(), cout, kdim);
    const std::size_t tile_size = static_cast<std::size_t>(kdim * tile * od.nx);
    std::vector<T> col(gw ? tile_size : 0);
    std::vector<T> gcol(gx ? tile_size : 0);
    for (std::int64_t s = 0; s < n; ++s) {
      if (gb) {
        CMapMat<T> gy(self.grad.data() + s * cout * vout, cout, vout);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(gb->data(), cout) += gy.rowwise().sum();
      }
      for (int r0 = 0; r0 < rows; r0 += tile) {
        const int r1 = std::min(rows, r0 + tile);
        const std::int64_t cols = static_cast<std::int64_t>(r1 - r0) * od.nx;
        CStridedMap<T> gy(self.grad.data() + s * cout * vout + static_cast<std::int64_t>(r0) * od.nx, cout, cols,
                          Eigen::OuterStride<>(vout));
        if (gw) {
          im2col(xv + s * cin * vin, cin, in, od, stride, r0, r1, col.data());
          MapMat<T>(gw->data(), cout, kdim).noalias() += gy * CMapMat<T>(col.data(), kdim, cols).transpose();
        }
        if (gx) {
          MapMat<T>(gcol.data(), kdim, cols).noalias() = wm.transpose() * gy;
          col2im(gcol.data(), cin, in, od, stride, r0, r1, gx->data() + s * cin * vin);
        }
      }
    }
  });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                  bool use_batch_stats, T momentum, T eps) {
  const auto& s = x.shape();
  const std::int64_t n = s[0], c = s[1];
  const std::int64_t v = x.value().size() / (n * c);
  const std::int64_t count = n * v;
  std::vector<T> mu(c), inv(c);
  const T* xv = x.value().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    if (use_batch_stats) {
      T m = 0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < v; ++j) m += xv[(i * c + ch) * v + j];
      m /= static_cast<T>(count);
      T var = 0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < v; ++j) {
          const T d = xv[(i * c + ch) * v + j] - m;
          var += d * d;
        }
      var /= static_cast<T>(count);
      mu[ch] = m;
      inv[ch] = T(1) / std::sqrt(var + eps);
      const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
      state.running_mean[ch] = (T(1) - momentum) * state.running_mean[ch] + momentum * m;
      state.running_var[ch] = (T(1) - momentum) * state.running_var[ch] + momentum * unbiased;
    } else {
      mu[ch] = state.running_mean[ch];
      inv[ch] = T(1) / std::sqrt(state.running_var[ch] + eps);
    }
  }
  Tensor<T> out(s);
  auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(x.value().size()));
  const T* g = gamma.value().data();
  const T* bt = beta.value().data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t j = 0; j < v; ++j) {
        const std::int64_t idx = (i * c + ch) * v + j;
        const T h = (xv[idx] - mu[ch]) * inv[ch];
        (*xhat)[idx] = h;
        out[idx] = g[ch] * h + bt[ch];
      }
  return make_result<T>(std::move(out), {x, gamma, beta},
                        [=, inv = std::move(inv)](Node<T>& self) {
    auto* gx = grad_of(self, 0);
    auto* gg = grad_of(self, 1);
    auto* gbt = grad_of(self, 2);
    const T* gm = self.parents[1]->value.data();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      T sg = 0, sgh = 0;
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < v; ++j) {
          const std::int64_t idx = (i * c + ch) * v + j;
          sg += self.grad[idx];
          sgh += self.grad[idx] * (*xhat)[idx];
        }
      if (gg) (*gg)[ch] += sgh;
      if (gbt) (*gbt)[ch] += sg;
      if (!gx) continue;
      if (use_batch_stats) {
        const T k = gm[ch] * inv[ch] / static_cast<T>(count);
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < v; ++j) {
            const std::int64_t idx = (i * c + ch) * v + j;
            (*gx)[idx] += k * (static_cast<T>(count) * self.grad[idx] - sg - (*xhat)[idx] * sgh);
          }
      } else {
        const T k = gm[ch] * inv[ch];
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < v; ++j) {
            const std::int64_t idx = (i * c + ch) * v + j;
            (*gx)[idx] += k * self.grad[idx];
          }
      }
    }
  });
}

#define ATTNREG_INSTANTIATE_CONV(T)                                                      \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, int);              \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&,                \
                             BatchNormState<T>&, bool, T, T);

ATTNREG_INSTANTIATE_CONV(float)
ATTNREG_INSTANTIATE_CONV(double)

}  // namespace attnreg::nn
