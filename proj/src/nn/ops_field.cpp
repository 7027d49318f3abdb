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

#include "attnreg/error.hpp"
#include "attnreg/field_kernels.hpp"
#include "attnreg/nn/ops.hpp"

namespace attnreg::nn {

template <typename T>
Var<T> warp(const Var<T>& img, const Var<T>& disp) {
  const auto& is = img.shape();
  const auto& ds = disp.shape();
  if (is.size() != 5 || ds.size() != 5 || ds[1] != 3 || is[0] != ds[0] || is[2] != ds[2] ||
      is[3] != ds[3] || is[4] != ds[4]) {
    throw ValidationError("warp: image " + shape_str(is) + " incompatible with displacement " + shape_str(ds));
  }
  const std::int64_t n = is[0], c = is[1];
  const Dims d = spatial_dims(is);
  const std::int64_t v = d.voxels();
  Tensor<T> out(is);
  for (std::int64_t s = 0; s < n; ++s) {
    kernels::warp_linear(img.value().data() + s * c * v, static_cast<int>(c), d,
                         disp.value().data() + s * 3 * v, out.data() + s * c * v);
  }
  return make_result<T>(std::move(out), {img, disp}, [=](Node<T>& self) {
    auto* gi = grad_of(self, 0);
    auto* gd = grad_of(self, 1);
    for (std::int64_t s = 0; s < n; ++s) {
      kernels::warp_linear_backward(self.parents[0]->value.data() + s * c * v, static_cast<int>(c), d,
                                    self.parents[1]->value.data() + s * 3 * v,
                                    self.grad.data() + s * c * v, gi ? gi->data() + s * c * v : nullptr,
                                    gd ? gd->data() + s * 3 * v : nullptr);
    }
  });
}

template <typename T>
Var<T> affine_displacement(const Var<T>& params, Dims dims) {
  const auto& ps = params.shape();
  if (ps.size() != 2 || ps[1] != 12) {
    throw ValidationError("affine_displacement expects [N, 12], got " + shape_str(ps));
  }
  const std::int64_t n = ps[0], v = dims.voxels();
  Tensor<T> out({n, 3, dims.nz, dims.ny, dims.nx});
  for (std::int64_t s = 0; s < n; ++s) {
    kernels::affine_displacement(params.value().data() + s * 12, dims, out.data() + s * 3 * v);
  }
  return make_result<T>(std::move(out), {params}, [=](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::int64_t s = 0; s < n; ++s) {
        kernels::affine_displacement_backward(dims, self.grad.data() + s * 3 * v, g->data() + s * 12);
      }
    }
  });
}

template <typename T>
Var<T> compose(const Var<T>& u1, const Var<T>& u2) {
  return add(u2, warp(u1, u2));
}

template <typename T>
Var<T> exponentiate(const Var<T>& v, int steps) {
  if (steps < 0) throw ValidationError("integration steps must be >= 0");
  Var<T> u = scale(v, static_cast<T>(std::ldexp(1.0, -steps)));
  for (int s = 0; s < steps; ++s) u = compose(u, u);
  return u;
}

#define ATTNREG_INSTANTIATE_FIELD(T)                                \
  template Var<T> warp(const Var<T>&, const Var<T>&);               \
  template Var<T> affine_displacement(const Var<T>&, Dims);         \
  template Var<T> compose(const Var<T>&, const Var<T>&);            \
  template Var<T> exponentiate(const Var<T>&, int);

ATTNREG_INSTANTIATE_FIELD(float)
ATTNREG_INSTANTIATE_FIELD(double)

}  // namespace attnreg::nn
