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

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "attnreg/dims.hpp"
#include "attnreg/nn/ops.hpp"
#include "attnreg/nn/params.hpp"

namespace attnreg {

/// Which attention components are present. All false is the BaseModel.
struct AblationFlags {
  bool use_sam = true;
  bool use_cam = true;
  bool use_gfm = true;

  /// Row label used in ablation tables.
  std::string label() const;
  bool operator==(const AblationFlags&) const = default;
};

enum class AttentionScaling {
  per_head,   // 1 / sqrt(d_head)
  model_dim,  // 1 / sqrt(k), the single-head reading
};

struct ModelConfig {
  Dims dims{32, 32, 16};
  int affine_stages = 5;
  int affine_base = 16;
  int affine_max_channels = 256;
  int encoder_levels = 3;
  int encoder_base = 16;
  int token_dim = 252;
  int heads = 12;
  int tem_layers = 12;
  int mlp_ratio = 4;
  int max_tokens = 256;
  AttentionScaling scaling = AttentionScaling::per_head;
  double leaky_slope = 0.2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double ln_eps = 1e-5;
  int integration_steps = 7;
  AblationFlags flags;

  void validate() const;
  /// Token grid after the encoder's halvings.
  Dims token_grid() const;
  bool operator==(const ModelConfig&) const = default;
};

namespace net {

using nn::Var;

/// 3x3x3 convolution (no bias) + batch norm + LeakyReLU.
template <typename T>
class ConvBlock {
 public:
  ConvBlock(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name, int in, int out,
            int stride, const ModelConfig& cfg);
  Var<T> forward(const Var<T>& x, bool training) const;

 private:
  Var<T> w_, gamma_, beta_;
  nn::BatchNormState<T>* state_;
  int stride_;
  T slope_, momentum_, eps_;
};

/// Plain 3x3x3 convolution with bias.
template <typename T>
struct Conv {
  Var<T> w, b;
  Var<T> forward(const Var<T>& x) const { return nn::conv3d(x, w, b, 1); }
};

template <typename T>
class AffineNet {
 public:
  AffineNet(nn::ParamStore<T>& store, nn::Initializer<T>& init, const ModelConfig& cfg);
  /// f, m: [N, 1, ...] -> params [N, 12].
  Var<T> forward(const Var<T>& f, const Var<T>& m, bool training) const;

 private:
  std::vector<ConvBlock<T>> blocks_;
  Var<T> fc_w_, fc_b_;
};

template <typename T>
class Encoder {
 public:
  struct Output {
    std::vector<Var<T>> skips;  // full resolution input first, then each level except the deepest
    Var<T> tokens;              // [N, L, k]
    Dims grid;
  };

  Encoder(nn::ParamStore<T>& store, nn::Initializer<T>& init, const ModelConfig& cfg);
  Output forward(const Var<T>& x, bool training) const;

 private:
  std::vector<ConvBlock<T>> blocks_;  // two per level
  Var<T> proj_w_, proj_b_;
  int levels_;
};

/// Transformer encoder: learnable positions then post-norm layers.
template <typename T>
class Tem {
 public:
  /// `segments` position tables of max_tokens rows each are allocated.
  Tem(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name, const ModelConfig& cfg,
      int segments);

  /// Adds positions starting at table row `row_offset`, then runs the layers.
  Var<T> forward(const Var<T>& x, std::int64_t row_offset = 0, nn::AttentionProbe<T>* probe = nullptr) const;
  Var<T> add_positions(const Var<T>& x, std::int64_t row_offset) const;
  Var<T> layers(const Var<T>& x, nn::AttentionProbe<T>* probe = nullptr) const;
  /// Multi-head attention of one layer: concatenated head outputs before the output projection.
  Var<T> heads(const Var<T>& x, int layer, nn::AttentionProbe<T>* probe = nullptr) const;

  std::int64_t max_tokens() const { return max_tokens_; }
  const Var<T>& positions() const { return pos_; }

 private:
  struct Layer {
    Var<T> wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };
  std::vector<Layer> layers_;
  Var<T> pos_;
  int heads_;
  T scale_, ln_eps_;
  std::int64_t max_tokens_;
};

template <typename T>
class Decoder {
 public:
  Decoder(nn::ParamStore<T>& store, nn::Initializer<T>& init, const std::string& name, const ModelConfig& cfg,
          int token_in);
  /// tokens [N, L, token_in] on `grid`; skips of f and m_a from the shared encoder.
  Var<T> forward(const Var<T>& tokens, Dims grid, const std::vector<Var<T>>& skips_f,
                 const std::vector<Var<T>>& skips_m, bool training) const;
  Conv<T>& head() { return head_; }

 private:
  Var<T> in_w_, in_b_;
  std::vector<ConvBlock<T>> blocks_;
  Conv<T> head_;
};

/// Gated fusion of the two branch velocities.
template <typename T>
class Gfm {
 public:
  Gfm(nn::ParamStore<T>& store, nn::Initializer<T>& init);
  Var<T> forward(const Var<T>& v_c, const Var<T>& v_s) const;
  /// Sigmoid gates [N, 6, ...]: w_c then w_s.
  Var<T> gates(const Var<T>& v_c, const Var<T>& v_s) const;
  Conv<T>& conv1() { return conv1_; }
  Conv<T>& conv2() { return conv2_; }

 private:
  Conv<T> conv1_, conv2_;
};

}  // namespace net

/// Every intermediate of one forward pass over a batch.
template <typename T>
struct Forward {
  nn::Var<T> affine;  // [N, 12]
  nn::Var<T> u_affine;
  nn::Var<T> m_a;
  nn::Var<T> v_s, v_c;  // null when the branch is absent
  nn::Var<T> v;
  nn::Var<T> phi;
  nn::Var<T> m_d;
  nn::Var<T> seg_a, seg_d;  // warped moving masks, when supplied
};

/// The composed affine + deformable network.
template <typename T>
class RegNet {
 public:
  RegNet(const ModelConfig& cfg, std::uint64_t seed);
  RegNet(const RegNet&) = delete;
  RegNet& operator=(const RegNet&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore<T>& store() { return store_; }
  const nn::ParamStore<T>& store() const { return store_; }

  /// f, m (and optional m_seg): [N, 1, nz, ny, nx] on the configured grid.
  Forward<T> forward(const nn::Var<T>& f, const nn::Var<T>& m, const nn::Var<T>& m_seg, bool training) const;

  nn::Var<T> affine_forward(const nn::Var<T>& f, const nn::Var<T>& m, bool training) const;
  typename net::Encoder<T>::Output encode(const nn::Var<T>& x, bool training) const;
  nn::Var<T> sam_branch(const nn::Var<T>& e_f, const nn::Var<T>& e_m) const;
  nn::Var<T> cam_branch(const nn::Var<T>& e_f, const nn::Var<T>& e_m, nn::AttentionProbe<T>* probe = nullptr) const;

  net::AffineNet<T>& affine_net() { return *affine_; }
  net::Tem<T>* sam_fixed() { return sam_fixed_.get(); }
  net::Tem<T>* sam_moving() { return sam_moving_.get(); }
  net::Tem<T>* cam() { return cam_.get(); }
  net::Decoder<T>* decoder_s() { return decoder_s_.get(); }
  net::Decoder<T>* decoder_c() { return decoder_c_.get(); }
  net::Decoder<T>* decoder_base() { return decoder_base_.get(); }
  net::Gfm<T>* gfm() { return gfm_.get(); }

 private:
  ModelConfig cfg_;
  nn::ParamStore<T> store_;
  std::unique_ptr<net::AffineNet<T>> affine_;
  std::unique_ptr<net::Encoder<T>> encoder_;
  std::unique_ptr<net::Tem<T>> sam_fixed_, sam_moving_, cam_;
  std::unique_ptr<net::Decoder<T>> decoder_s_, decoder_c_, decoder_base_;
  std::unique_ptr<net::Gfm<T>> gfm_;
};

/// Parameter group of a name: the text before the first '.'.
std::string param_group(const std::string& name);

}  // namespace attnreg
