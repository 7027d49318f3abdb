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
using HeadMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CHeadMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

}  // namespace

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads, T scale,
                 AttentionProbe<T>* probe) {
  const auto& s = q.shape();
  if (s.size() != 3 || k.shape() != s || v.shape() != s) {
    throw ValidationError("attention: q/k/v shapes must match, got " + shape_str(s) + ", " +
                          shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::int64_t b = s[0], len = s[1], dim = s[2];
  if (heads < 1 || dim % heads != 0) {
    throw ValidationError("attention: dim " + std::to_string(dim) + " not divisible by " +
                          std::to_string(heads) + " heads");
  }
  const std::int64_t dh = dim / heads;
  const Eigen::OuterStride<> stride(dim);

  auto probs = std::make_shared<Tensor<T>>(Shape{b, heads, len, len});
  Tensor<T> out(s);
  for (std::int64_t i = 0; i < b; ++i) {
    for (int h = 0; h < heads; ++h) {
      const std::int64_t off = i * len * dim + h * dh;
      CHeadMap<T> qh(q.value().data() + off, len, dh, stride);
      CHeadMap<T> kh(k.value().data() + off, len, dh, stride);
      CHeadMap<T> vh(v.value().data() + off, len, dh, stride);
      Eigen::Map<RowMat<T>> p(probs->data() + (i * heads + h) * len * len, len, len);
      p.noalias() = (qh * kh.transpose()) * scale;
      for (std::int64_t r = 0; r < len; ++r) {
        const T m = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
      }
      HeadMap<T>(out.data() + off, len, dh, stride).noalias() = p * vh;
    }
  }
  if (probe) probe->probabilities.push_back(*probs);

  return make_result<T>(std::move(out), {q, k, v}, [=](Node<T>& self) {
    auto* gq = grad_of(self, 0);
    auto* gk = grad_of(self, 1);
    auto* gv = grad_of(self, 2);
    RowMat<T> dp(len, len), ds(len, len);
    for (std::int64_t i = 0; i < b; ++i) {
      for (int h = 0; h < heads; ++h) {
        const std::int64_t off = i * len * dim + h * dh;
        CHeadMap<T> qh(self.parents[0]->value.data() + off, len, dh, stride);
        CHeadMap<T> kh(self.parents[1]->value.data() + off, len, dh, stride);
        CHeadMap<T> vh(self.parents[2]->value.data() + off, len, dh, stride);
        CHeadMap<T> go(self.grad.data() + off, len, dh, stride);
        Eigen::Map<const RowMat<T>> p(probs->data() + (i * heads + h) * len * len, len, len);
        if (gv) HeadMap<T>(gv->data() + off, len, dh, stride).noalias() += p.transpose() * go;
        if (!gq && !gk) continue;
        dp.noalias() = go * vh.transpose();
        for (std::int64_t r = 0; r < len; ++r) {
          const T dot = (dp.row(r).array() * p.row(r).array()).sum();
          ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
        }
        if (gq) HeadMap<T>(gq->data() + off, len, dh, stride).noalias() += (ds * kh) * scale;
        if (gk) HeadMap<T>(gk->data() + off, len, dh, stride).noalias() += (ds.transpose() * qh) * scale;
      }
    }
  });
}

template Var<float> attention(const Var<float>&, const Var<float>&, const Var<float>&, int, float,
                              AttentionProbe<float>*);
template Var<double> attention(const Var<double>&, const Var<double>&, const Var<double>&, int, double,
                               AttentionProbe<double>*);

}  // namespace attnreg::nn
