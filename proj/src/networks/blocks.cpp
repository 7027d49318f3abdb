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

#include <algorithm>

#include "attnreg/error.hpp"
#include "attnreg/networks.hpp"

namespace attnreg::net {

template <typename T>
ConvBlock<T>::ConvBlock(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name, int in,
                        int out, int stride, const ModelConfig& cfg)
    : stride_(stride),
      slope_(static_cast<T>(cfg.leaky_slope)),
      momentum_(static_cast<T>(cfg.bn_momentum)),
      eps_(static_cast<T>(cfg.bn_eps)) {
  w_ = store.add(name + ".w", init.conv_kaiming(out, in, cfg.leaky_slope));
  gamma_ = store.add(name + ".bn.gamma", nn::Tensor<T>({out}, T(1)));
  beta_ = store.add(name + ".bn.beta", nn::Tensor<T>({out}, T(0)));
  state_ = &store.add_batch_norm_state(name + ".bn", out);
}

template <typename T>
Var<T> ConvBlock<T>::forward(const Var<T>& x, bool training) const {
  const Var<T> h = nn::conv3d(x, w_, Var<T>(), stride_);
  const bool batch_stats = training && h.shape()[0] >= 2;
  return nn::leaky_relu(nn::batch_norm(h, gamma_, beta_, *state_, batch_stats, momentum_, eps_), slope_);
}

template <typename T>
AffineNet<T>::AffineNet(nn::ParamStore<T>& store, nn::Initializer<T>& init, const ModelConfig& cfg) {
  int in = 2;
  for (int s = 0; s < cfg.affine_stages; ++s) {
    const int c = std::min(cfg.affine_base << s, cfg.affine_max_channels);
    const std::string prefix = "affine.stage" + std::to_string(s);
    blocks_.emplace_back(store, init, prefix + ".down", in, c, 2, cfg);
    blocks_.emplace_back(store, init, prefix + ".conv0", c, c, 1, cfg);
    blocks_.emplace_back(store, init, prefix + ".conv1", c, c, 1, cfg);
    in = c;
  }
  fc_w_ = store.add("affine.fc.w", nn::Tensor<T>({in, 12}, T(0)));
  nn::Tensor<T> bias({12}, T(0));
  bias[0] = bias[5] = bias[10] = T(1);
  fc_b_ = store.add("affine.fc.b", std::move(bias));
}

template <typename T>
Var<T> AffineNet<T>::forward(const Var<T>& f, const Var<T>& m, bool training) const {
  Var<T> h = nn::concat<T>({f, m}, 1);
  for (const auto& b : blocks_) h = b.forward(h, training);
  return nn::linear(nn::global_avg_pool(h), fc_w_, fc_b_);
}

template <typename T>
Encoder<T>::Encoder(nn::ParamStore<T>& store, nn::Initializer<T>& init, const ModelConfig& cfg)
    : levels_(cfg.encoder_levels) {
  int in = 1;
  for (int l = 0; l < cfg.encoder_levels; ++l) {
    const int c = cfg.encoder_base << l;
    const std::string prefix = "encoder.level" + std::to_string(l);
    blocks_.emplace_back(store, init, prefix + ".down", in, c, 2, cfg);
    blocks_.emplace_back(store, init, prefix + ".conv", c, c, 1, cfg);
    in = c;
  }
  proj_w_ = store.add("encoder.proj.w", init.xavier(in, cfg.token_dim));
  proj_b_ = store.add("encoder.proj.b", nn::Tensor<T>({cfg.token_dim}, T(0)));
}

template <typename T>
typename Encoder<T>::Output Encoder<T>::forward(const Var<T>& x, bool training) const {
  Output out;
  out.skips.push_back(x);
  Var<T> h = x;
  for (int l = 0; l < levels_; ++l) {
    h = blocks_[2 * l].forward(h, training);
    h = blocks_[2 * l + 1].forward(h, training);
    if (l + 1 < levels_) out.skips.push_back(h);
  }
  const auto& s = h.shape();
  out.grid = nn::spatial_dims(s);
  const Var<T> flat = nn::transpose_last2(nn::reshape(h, {s[0], s[1], out.grid.voxels()}));
  out.tokens = nn::linear(flat, proj_w_, proj_b_);
  return out;
}

template <typename T>
Decoder<T>::Decoder(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name,
                    const ModelConfig& cfg, int token_in) {
  const int deep = cfg.encoder_base << (cfg.encoder_levels - 1);
  in_w_ = store.add(name + ".in.w", init.xavier(token_in, deep));
  in_b_ = store.add(name + ".in.b", nn::Tensor<T>({deep}, T(0)));
  int prev = deep;
  for (int j = cfg.encoder_levels - 1; j >= 0; --j) {
    const int skip = j == 0 ? 1 : cfg.encoder_base << (j - 1);
    const int out = j == 0 ? cfg.encoder_base : skip;
    blocks_.emplace_back(store, init, name + ".up" + std::to_string(j), prev + 2 * skip, out, 1, cfg);
    prev = out;
  }
  head_.w = store.add(name + ".head.w", nn::Tensor<T>({3, prev, 3, 3, 3}, T(0)));
  head_.b = store.add(name + ".head.b", nn::Tensor<T>({3}, T(0)));
}

template <typename T>
Var<T> Decoder<T>::forward(const Var<T>& tokens, Dims grid, const std::vector<Var<T>>& skips_f,
                           const std::vector<Var<T>>& skips_m, bool training) const {
  if (skips_f.size() != blocks_.size() || skips_m.size() != blocks_.size()) {
    throw ValidationError("decoder expects " + std::to_string(blocks_.size()) + " skip levels");
  }
  if (tokens.shape()[1] != grid.voxels()) throw ValidationError("token count does not match the token grid");
  const std::int64_t n = tokens.shape()[0];
  Var<T> h = nn::transpose_last2(nn::linear(tokens, in_w_, in_b_));
  h = nn::reshape(h, {n, h.shape()[1], grid.nz, grid.ny, grid.nx});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::size_t j = blocks_.size() - 1 - i;
    h = nn::upsample_nearest(h, nn::spatial_dims(skips_f[j].shape()));
    h = blocks_[i].forward(nn::concat<T>({h, skips_f[j], skips_m[j]}, 1), training);
  }
  return head_.forward(h);
}

template <typename T>
Gfm<T>::Gfm(nn::ParamStore<T>& store, nn::Initializer<T>& init) {
  conv1_.w = store.add("gfm.conv1.w", init.conv_kaiming(6, 6, 1.0));
  conv1_.b = store.add("gfm.conv1.b", nn::Tensor<T>({6}, T(0)));
  // v = v'_c + v'_s through the centre tap; with gates near 0.5 this starts as the branch mean
  nn::Tensor<T> w({3, 6, 3, 3, 3}, T(0));
  for (int o = 0; o < 3; ++o) {
    w[((o * 6 + o) * 27) + 13] = T(1);
    w[((o * 6 + o + 3) * 27) + 13] = T(1);
  }
  conv2_.w = store.add("gfm.conv2.w", std::move(w));
  conv2_.b = store.add("gfm.conv2.b", nn::Tensor<T>({3}, T(0)));
}

template <typename T>
Var<T> Gfm<T>::gates(const Var<T>& v_c, const Var<T>& v_s) const {
  return nn::sigmoid(conv1_.forward(nn::concat<T>({v_c, v_s}, 1)));
}

template <typename T>
Var<T> Gfm<T>::forward(const Var<T>& v_c, const Var<T>& v_s) const {
  const Var<T> g = gates(v_c, v_s);
  const Var<T> vc = nn::mul(nn::slice(g, 1, 0, 3), v_c);
  const Var<T> vs = nn::mul(nn::slice(g, 1, 3, 3), v_s);
  return conv2_.forward(nn::concat<T>({vc, vs}, 1));
}

template class ConvBlock<float>;
template class ConvBlock<double>;
template class AffineNet<float>;
template class AffineNet<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class Gfm<float>;
template class Gfm<double>;

}  // namespace attnreg::net
