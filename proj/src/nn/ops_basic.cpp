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
#include <numbers>

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

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

template <typename T, typename F, typename G>
Var<T> unary(const Var<T>& a, F f, G df) {
  Tensor<T> out(a.shape());
  const T* x = a.value().data();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result<T>(std::move(out), {a}, [df](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      const T* x = self.parents[0]->value.data();
      const T* y = self.value.data();
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * df(x[i], y[i]);
    }
  });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = grad_of(self, p)) *g += self.grad;
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) *g += self.grad;
    if (auto* g = grad_of(self, 1))
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* g = grad_of(self, 0))
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    if (auto* g = grad_of(self, 1))
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return make_result<T>(std::move(out), {a}, [s](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * s;
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T acc = 0;
  for (T v : a.value().span()) acc += v;
  return make_result<T>(Tensor<T>({1}, acc), {a}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (auto& v : g->span()) v += self.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const T inv = T(1) / static_cast<T>(a.value().size());
  return scale(sum(a), inv);
}

template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<T>& weights) {
  if (terms.size() != weights.size()) throw ValidationError("weighted_sum: size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (!terms[i]) continue;
    if (terms[i].value().size() != 1) throw ValidationError("weighted_sum: terms must be scalars");
    acc += weights[i] * terms[i].value()[0];
  }
  return make_result<T>(Tensor<T>({1}, acc), terms, [weights](Node<T>& self) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (auto* g = grad_of(self, i)) (*g)[0] += weights[i] * self.grad[0];
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
  Tensor<T> out = a.value().reshaped(std::move(s));
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::int64_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) throw ValidationError("concat of nothing");
  Shape shape = xs[0].shape();
  if (axis < 0) axis += static_cast<int>(shape.size());
  std::int64_t total = 0;
  for (const auto& x : xs) {
    const auto& s = x.shape();
    if (s.size() != shape.size()) throw ValidationError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) != axis && s[d] != shape[d]) {
        throw ValidationError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(shape));
      }
    }
    total += s[axis];
  }
  shape[axis] = total;
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  std::vector<std::int64_t> widths;
  for (const auto& x : xs) widths.push_back(x.shape()[axis] * inner);
  const std::int64_t row = total * inner;

  Tensor<T> out(shape);
  std::int64_t offset = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const T* src = xs[i].value().data();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * widths[i], widths[i], out.data() + o * row + offset);
    }
    offset += widths[i];
  }
  return make_result<T>(std::move(out), xs, [widths, outer, row](Node<T>& self) {
    std::int64_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (auto* g = grad_of(self, i)) {
        for (std::int64_t o = 0; o < outer; ++o) {
          const T* src = self.grad.data() + o * row + off;
          T* dst = g->data() + o * widths[i];
          for (std::int64_t j = 0; j < widths[i]; ++j) dst[j] += src[j];
        }
      }
      off += widths[i];
    }
  });
}

template <typename T>
Var<T> slice(const Var<T>& a, int axis, std::int64_t start, std::int64_t len) {
  Shape shape = a.shape();
  if (axis < 0) axis += static_cast<int>(shape.size());
  if (start < 0 || len < 0 || start + len > shape[axis]) throw ValidationError("slice out of range");
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::int64_t src_row = shape[axis] * inner;
  const std::int64_t width = len * inner;
  const std::int64_t off = start * inner;
  shape[axis] = len;
  Tensor<T> out(shape);
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(a.value().data() + o * src_row + off, width, out.data() + o * width);
  }
  return make_result<T>(std::move(out), {a}, [=](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::int64_t o = 0; o < outer; ++o) {
        T* dst = g->data() + o * src_row + off;
        const T* src = self.grad.data() + o * width;
        for (std::int64_t j = 0; j < width; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Var<T> transpose_last2(const Var<T>& a) {
  const auto& s = a.shape();
  if (s.size() != 3) throw ValidationError("transpose_last2 expects rank 3");
  const std::int64_t b = s[0], m = s[1], n = s[2];
  Tensor<T> out({b, n, m});
  for (std::int64_t i = 0; i < b; ++i) {
    MapMat<T>(out.data() + i * m * n, n, m) = CMapMat<T>(a.value().data() + i * m * n, m, n).transpose();
  }
  return make_result<T>(std::move(out), {a}, [b, m, n](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::int64_t i = 0; i < b; ++i) {
        MapMat<T>(g->data() + i * m * n, m, n) += CMapMat<T>(self.grad.data() + i * m * n, n, m).transpose();
      }
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  return unary<T>(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  constexpr T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
  const T inv_sqrt_2pi = static_cast<T>(0.5 * std::numbers::inv_sqrtpi_v<double> * std::numbers::sqrt2_v<double>);
  return unary<T>(
      a, [=](T x) { return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2)); },
      [=](T x, T) {
        return T(0.5) * (T(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(T(-0.5) * x * x);
      });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary<T>(
      a, [](T x) { return T(1) / (T(1) + std::exp(-x)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const auto& xs = x.shape();
  const std::int64_t in = w.shape()[0], out_dim = w.shape()[1];
  if (xs.back() != in) {
    throw ValidationError("linear: input " + shape_str(xs) + " vs weight " + shape_str(w.shape()));
  }
  const bool has_bias = static_cast<bool>(b);
  const std::int64_t rows = x.value().size() / in;
  Shape os = xs;
  os.back() = out_dim;
  Tensor<T> out(os);
  MapMat<T> y(out.data(), rows, out_dim);
  y.noalias() = CMapMat<T>(x.value().data(), rows, in) * CMapMat<T>(w.value().data(), in, out_dim);
  if (has_bias) {
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b.value().data(), out_dim);
  }
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(out), parents, [rows, in, out_dim, has_bias](Node<T>& self) {
    CMapMat<T> gy(self.grad.data(), rows, out_dim);
    if (auto* g = grad_of(self, 0)) {
      MapMat<T>(g->data(), rows, in).noalias() += gy * CMapMat<T>(self.parents[1]->value.data(), in, out_dim).transpose();
    }
    if (auto* g = grad_of(self, 1)) {
      MapMat<T>(g->data(), in, out_dim).noalias() += CMapMat<T>(self.parents[0]->value.data(), rows, in).transpose() * gy;
    }
    if (has_bias) {
      if (auto* g = grad_of(self, 2)) {
        Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(g->data(), out_dim) += gy.colwise().sum();
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const std::int64_t k = x.shape().back();
  const std::int64_t rows = x.value().size() / k;
  Tensor<T> out(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(static_cast<std::size_t>(x.value().size()));
  auto inv = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  const T* gm = gamma.value().data();
  const T* bt = beta.value().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* src = x.value().data() + r * k;
    T mu = 0;
    for (std::int64_t j = 0; j < k; ++j) mu += src[j];
    mu /= static_cast<T>(k);
    T var = 0;
    for (std::int64_t j = 0; j < k; ++j) var += (src[j] - mu) * (src[j] - mu);
    var /= static_cast<T>(k);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv)[r] = is;
    for (std::int64_t j = 0; j < k; ++j) {
      const T h = (src[j] - mu) * is;
      (*xhat)[r * k + j] = h;
      out[r * k + j] = gm[j] * h + bt[j];
    }
  }
  return make_result<T>(std::move(out), {x, gamma, beta}, [k, rows, xhat, inv](Node<T>& self) {
    const T* gm = self.parents[1]->value.data();
    auto* gx = grad_of(self, 0);
    auto* gg = grad_of(self, 1);
    auto* gb = grad_of(self, 2);
    for (std::int64_t r = 0; r < rows; ++r) {
      const T* gy = self.grad.data() + r * k;
      const T* h = xhat->data() + r * k;
      if (gg || gb) {
        for (std::int64_t j = 0; j < k; ++j) {
          if (gg) (*gg)[j] += gy[j] * h[j];
          if (gb) (*gb)[j] += gy[j];
        }
      }
      if (gx) {
        T s1 = 0, s2 = 0;
        for (std::int64_t j = 0; j < k; ++j) {
          const T d = gy[j] * gm[j];
          s1 += d;
          s2 += d * h[j];
        }
        const T c = (*inv)[r] / static_cast<T>(k);
        T* dst = gx->data() + r * k;
        for (std::int64_t j = 0; j < k; ++j) {
          dst[j] += c * (static_cast<T>(k) * gy[j] * gm[j] - s1 - h[j] * s2);
        }
      }
    }
  });
}

template <typename T>
Var<T> add_position(const Var<T>& x, const Var<T>& table, std::int64_t row_offset) {
  const auto& s = x.shape();
  if (s.size() != 3 || table.shape().size() != 2 || table.shape()[1] != s[2]) {
    throw ValidationError("add_position: tokens " + shape_str(s) + " vs table " + shape_str(table.shape()));
  }
  const std::int64_t b = s[0], len = s[1], k = s[2];
  if (row_offset < 0 || row_offset + len > table.shape()[0]) {
    throw ValidationError("sequence length " + std::to_string(len) + " exceeds position table of " +
                          std::to_string(table.shape()[0]) + " rows at offset " + std::to_string(row_offset));
  }
  Tensor<T> out(s);
  const T* pos = table.value().data() + row_offset * k;
  for (std::int64_t i = 0; i < b; ++i)
    for (std::int64_t j = 0; j < len * k; ++j) out[i * len * k + j] = x.value()[i * len * k + j] + pos[j];
  return make_result<T>(std::move(out), {x, table}, [=](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) *g += self.grad;
    if (auto* g = grad_of(self, 1)) {
      T* dst = g->data() + row_offset * k;
      for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t j = 0; j < len * k; ++j) dst[j] += self.grad[i * len * k + j];
    }
  });
}

template <typename T>
Var<T> upsample_nearest(const Var<T>& x, Dims target) {
  const auto& s = x.shape();
  const Dims src = spatial_dims(s);
  const std::int64_t planes = s[0] * s[1];
  std::vector<std::int64_t> map(static_cast<std::size_t>(target.voxels()));
  for (int z = 0; z < target.nz; ++z) {
    const int sz = static_cast<int>(static_cast<std::int64_t>(z) * src.nz / target.nz);
    for (int y = 0; y < target.ny; ++y) {
      const int sy = static_cast<int>(static_cast<std::int64_t>(y) * src.ny / target.ny);
      for (int xx = 0; xx < target.nx; ++xx) {
        const int sx = static_cast<int>(static_cast<std::int64_t>(xx) * src.nx / target.nx);
        map[target.index(xx, y, z)] = src.index(sx, sy, sz);
      }
    }
  }
  Tensor<T> out({s[0], s[1], target.nz, target.ny, target.nx});
  const std::int64_t vin = src.voxels(), vout = target.voxels();
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t i = 0; i < vout; ++i) out[p * vout + i] = x.value()[p * vin + map[i]];
  return make_result<T>(std::move(out), {x}, [map = std::move(map), planes, vin, vout](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t i = 0; i < vout; ++i) (*g)[p * vin + map[i]] += self.grad[p * vout + i];
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const auto& s = x.shape();
  const std::int64_t planes = s[0] * s[1];
  const std::int64_t v = x.value().size() / planes;
  Tensor<T> out({s[0], s[1]});
  for (std::int64_t p = 0; p < planes; ++p) {
    T acc = 0;
    for (std::int64_t i = 0; i < v; ++i) acc += x.value()[p * v + i];
    out[p] = acc / static_cast<T>(v);
  }
  return make_result<T>(std::move(out), {x}, [planes, v](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::int64_t p = 0; p < planes; ++p) {
        const T gp = self.grad[p] / static_cast<T>(v);
        for (std::int64_t i = 0; i < v; ++i) (*g)[p * v + i] += gp;
      }
    }
  });
}

#define ATTNREG_INSTANTIATE_BASIC(T)                                                         \
  template Var<T> add(const Var<T>&, const Var<T>&);                                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                         \
  template Var<T> scale(const Var<T>&, T);                                                   \
  template Var<T> sum(const Var<T>&);                                                        \
  template Var<T> mean(const Var<T>&);                                                       \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);           \
  template Var<T> reshape(const Var<T>&, Shape);                                             \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                   \
  template Var<T> slice(const Var<T>&, int, std::int64_t, std::int64_t);                     \
  template Var<T> transpose_last2(const Var<T>&);                                            \
  template Var<T> leaky_relu(const Var<T>&, T);                                              \
  template Var<T> gelu(const Var<T>&);                                                       \
  template Var<T> sigmoid(const Var<T>&);                                                    \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                \
  template Var<T> add_position(const Var<T>&, const Var<T>&, std::int64_t);                  \
  template Var<T> upsample_nearest(const Var<T>&, Dims);                                     \
  template Var<T> global_avg_pool(const Var<T>&);

ATTNREG_INSTANTIATE_BASIC(float)
ATTNREG_INSTANTIATE_BASIC(double)

}  // namespace attnreg::nn
