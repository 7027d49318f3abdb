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
#include "attnreg/networks.hpp"

namespace attnreg::net {

template <typename T>
Tem<T>::Tem(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name, const ModelConfig& cfg,
            int segments)
    : heads_(cfg.heads), ln_eps_(static_cast<T>(cfg.ln_eps)), max_tokens_(cfg.max_tokens) {
  const std::int64_t k = cfg.token_dim;
  const std::int64_t hidden = k * cfg.mlp_ratio;
  const double d = cfg.scaling == AttentionScaling::per_head ? static_cast<double>(k / cfg.heads)
                                                             : static_cast<double>(k);
  scale_ = static_cast<T>(1.0 / std::sqrt(d));
  pos_ = store.add(name + ".pos", init.normal({segments * max_tokens_, k}, 0.02));
  for (int i = 0; i < cfg.tem_layers; ++i) {
    const std::string p = name + ".layer" + std::to_string(i) + ".";
    Layer l;
    auto bias = [&](const char* n, std::int64_t size, T value = T(0)) {
      return store.add(p + n, nn::Tensor<T>({size}, value));
    };
    l.wq = store.add(p + "wq", init.xavier(k, k));
    l.bq = bias("bq", k);
    l.wk = store.add(p + "wk", init.xavier(k, k));
    l.bk = bias("bk", k);
    l.wv = store.add(p + "wv", init.xavier(k, k));
    l.bv = bias("bv", k);
    l.wo = store.add(p + "wo", init.xavier(k, k));
    l.bo = bias("bo", k);
    l.ln1_g = bias("ln1.gamma", k, T(1));
    l.ln1_b = bias("ln1.beta", k);
    l.w1 = store.add(p + "mlp.w1", init.xavier(k, hidden));
    l.b1 = bias("mlp.b1", hidden);
    l.w2 = store.add(p + "mlp.w2", init.xavier(hidden, k));
    l.b2 = bias("mlp.b2", k);
    l.ln2_g = bias("ln2.gamma", k, T(1));
    l.ln2_b = bias("ln2.beta", k);
    layers_.push_back(std::move(l));
  }
}

template <typename T>
Var<T> Tem<T>::add_positions(const Var<T>& x, std::int64_t row_offset) const {
  if (x.shape()[1] > max_tokens_) {
    throw ValidationError("sequence of " + std::to_string(x.shape()[1]) + " tokens exceeds max_tokens " +
                          std::to_string(max_tokens_));
  }
  return nn::add_position(x, pos_, row_offset);
}

template <typename T>
Var<T> Tem<T>::heads(const Var<T>& x, int layer, nn::AttentionProbe<T>* probe) const {
  const Layer& l = layers_.at(static_cast<std::size_t>(layer));
  const Var<T> q = nn::linear(x, l.wq, l.bq);
  const Var<T> k = nn::linear(x, l.wk, l.bk);
  const Var<T> v = nn::linear(x, l.wv, l.bv);
  return nn::attention(q, k, v, heads_, scale_, probe);
}

template <typename T>
Var<T> Tem<T>::layers(const Var<T>& x, nn::AttentionProbe<T>* probe) const {
  Var<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const Var<T> a = nn::linear(heads(h, static_cast<int>(i), probe), l.wo, l.bo);
    h = nn::layer_norm(nn::add(h, a), l.ln1_g, l.ln1_b, ln_eps_);
    const Var<T> m = nn::linear(nn::gelu(nn::linear(h, l.w1, l.b1)), l.w2, l.b2);
    h = nn::layer_norm(nn::add(h, m), l.ln2_g, l.ln2_b, ln_eps_);
  }
  return h;
}

template <typename T>
Var<T> Tem<T>::forward(const Var<T>& x, std::int64_t row_offset, nn::AttentionProbe<T>* probe) const {
  return layers(add_positions(x, row_offset), probe);
}

template class Tem<float>;
template class Tem<double>;

}  // namespace attnreg::net
