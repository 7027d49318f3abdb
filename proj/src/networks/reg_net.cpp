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

#include "attnreg/error.hpp"
#include "attnreg/networks.hpp"

namespace attnreg {

std::string AblationFlags::label() const {
  if (use_sam && use_cam) return use_gfm ? "The proposed method" : "BaseModel + SAM + CAM";
  if (use_sam) return "BaseModel + SAM";
  if (use_cam) return "BaseModel + CAM";
  return "BaseModel";
}

Dims ModelConfig::token_grid() const {
  Dims g = dims;
  for (int l = 0; l < encoder_levels; ++l) g = Dims{(g.nx + 1) / 2, (g.ny + 1) / 2, (g.nz + 1) / 2};
  return g;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("model config: " + what);
  };
  check(dims.nx >= 2 && dims.ny >= 2 && dims.nz >= 2, "dims must be at least 2 per axis, got " + dims.str());
  check(affine_stages >= 1 && affine_base >= 1 && affine_max_channels >= affine_base, "bad affine network shape");
  check(encoder_levels >= 1 && encoder_base >= 1, "bad encoder shape");
  check(token_dim >= 1 && heads >= 1 && token_dim % heads == 0, "token_dim must be divisible by heads");
  check(tem_layers >= 0 && mlp_ratio >= 1, "bad transformer shape");
  check(token_grid().voxels() <= max_tokens,
        "token grid " + token_grid().str() + " exceeds max_tokens " + std::to_string(max_tokens));
  check(leaky_slope >= 0.0 && bn_momentum > 0.0 && bn_momentum <= 1.0 && bn_eps > 0.0 && ln_eps > 0.0,
        "bad normalization constants");
  check(integration_steps >= 0, "integration_steps must be non-negative");
}

std::string param_group(const std::string& name) { return name.substr(0, name.find('.')); }

template <typename T>
RegNet<T>::RegNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Initializer<T> init(seed);
  affine_ = std::make_unique<net::AffineNet<T>>(store_, init, cfg_);
  encoder_ = std::make_unique<net::Encoder<T>>(store_, init, cfg_);
  const int k2 = 2 * cfg_.token_dim;
  const auto& f = cfg_.flags;
  if (f.use_sam) {
    sam_fixed_ = std::make_unique<net::Tem<T>>(store_, init, "sam_fixed", cfg_, 1);
    sam_moving_ = std::make_unique<net::Tem<T>>(store_, init, "sam_moving", cfg_, 1);
    decoder_s_ = std::make_unique<net::Decoder<T>>(store_, init, "decoder_s", cfg_, k2);
  }
  if (f.use_cam) {
    cam_ = std::make_unique<net::Tem<T>>(store_, init, "cam", cfg_, 2);
    decoder_c_ = std::make_unique<net::Decoder<T>>(store_, init, "decoder_c", cfg_, k2);
  }
  if (!f.use_sam && !f.use_cam) {
    decoder_base_ = std::make_unique<net::Decoder<T>>(store_, init, "decoder_base", cfg_, k2);
  }
  if (f.use_sam && f.use_cam && f.use_gfm) gfm_ = std::make_unique<net::Gfm<T>>(store_, init);
}

template <typename T>
nn::Var<T> RegNet<T>::affine_forward(const nn::Var<T>& f, const nn::Var<T>& m, bool training) const {
  return affine_->forward(f, m, training);
}

template <typename T>
typename net::Encoder<T>::Output RegNet<T>::encode(const nn::Var<T>& x, bool training) const {
  return encoder_->forward(x, training);
}

template <typename T>
nn::Var<T> RegNet<T>::sam_branch(const nn::Var<T>& e_f, const nn::Var<T>& e_m) const {
  if (!sam_fixed_) throw ValidationError("model was built without SAM");
  if (e_f.shape() != e_m.shape()) throw ValidationError("sam_branch: token shapes differ");
  return nn::concat<T>({sam_fixed_->forward(e_f), sam_moving_->forward(e_m)}, 2);
}

template <typename T>
nn::Var<T> RegNet<T>::cam_branch(const nn::Var<T>& e_f, const nn::Var<T>& e_m, nn::AttentionProbe<T>* probe) const {
  if (!cam_) throw ValidationError("model was built without CAM");
  if (e_f.shape() != e_m.shape()) throw ValidationError("cam_branch: token shapes differ");
  const std::int64_t len = e_f.shape()[1];
  const nn::Var<T> joint =
      nn::concat<T>({cam_->add_positions(e_f, 0), cam_->add_positions(e_m, cam_->max_tokens())}, 1);
  const nn::Var<T> out = cam_->layers(joint, probe);
  return nn::concat<T>({nn::slice(out, 1, 0, len), nn::slice(out, 1, len, len)}, 2);
}

template <typename T>
Forward<T> RegNet<T>::forward(const nn::Var<T>& f, const nn::Var<T>& m, const nn::Var<T>& m_seg,
                              bool training) const {
  const nn::Shape expected{f.shape().empty() ? 0 : f.shape()[0], 1, cfg_.dims.nz, cfg_.dims.ny, cfg_.dims.nx};
  if (f.shape() != expected || m.shape() != expected || (m_seg && m_seg.shape() != expected)) {
    throw ValidationError("input shape " + nn::shape_str(f.shape()) + " / " + nn::shape_str(m.shape()) +
                          " does not match the model grid " + cfg_.dims.str());
  }
  Forward<T> r;
  r.affine = affine_forward(f, m, training);
  r.u_affine = nn::affine_displacement(r.affine, cfg_.dims);
  r.m_a = nn::warp(m, r.u_affine);

  const auto ef = encode(f, training);
  const auto em = encode(r.m_a, training);
  if (sam_fixed_) {
    r.v_s = decoder_s_->forward(sam_branch(ef.tokens, em.tokens), ef.grid, ef.skips, em.skips, training);
  }
  if (cam_) {
    r.v_c = decoder_c_->forward(cam_branch(ef.tokens, em.tokens), ef.grid, ef.skips, em.skips, training);
  }
  if (r.v_s && r.v_c) {
    r.v = gfm_ ? gfm_->forward(r.v_c, r.v_s) : nn::scale(nn::add(r.v_s, r.v_c), T(0.5));
  } else if (r.v_s) {
    r.v = r.v_s;
  } else if (r.v_c) {
    r.v = r.v_c;
  } else {
    r.v = decoder_base_->forward(nn::concat<T>({ef.tokens, em.tokens}, 2), ef.grid, ef.skips, em.skips, training);
  }
  r.phi = nn::exponentiate(r.v, cfg_.integration_steps);
  r.m_d = nn::warp(r.m_a, r.phi);
  if (m_seg) {
    r.seg_a = nn::warp(m_seg, r.u_affine);
    r.seg_d = nn::warp(r.seg_a, r.phi);
  }
  return r;
}

template class RegNet<float>;
template class RegNet<double>;

}  // namespace attnreg
