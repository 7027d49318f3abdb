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

#include <map>
#include <random>
#include <string>

#include "attnreg/losses.hpp"
#include "attnreg/networks.hpp"
#include "attnreg/nn/ops.hpp"
#include "attnreg/synth.hpp"
#include "grad_check.hpp"

namespace testutil {

/// Every shape relation of the default model at 8^3 with tiny widths.
inline attnreg::ModelConfig tiny_config() {
  attnreg::ModelConfig c;
  c.dims = {8, 8, 8};
  c.affine_base = 4;
  c.affine_max_channels = 16;
  c.encoder_levels = 2;
  c.encoder_base = 4;
  c.token_dim = 24;
  c.heads = 2;
  c.tem_layers = 2;
  c.max_tokens = 16;
  return c;
}

/// Gives the zero-initialised output layers small random weights so every
/// parameter upstream of them receives a gradient.
template <typename T>
void randomize_heads(attnreg::RegNet<T>& net, std::uint64_t seed, double scale = 0.05) {
  std::mt19937_64 rng(seed);
  for (const char* name : {"affine.fc.w", "decoder_s.head.w", "decoder_s.head.b", "decoder_c.head.w",
                           "decoder_c.head.b", "decoder_base.head.w", "decoder_base.head.b"}) {
    attnreg::nn::Var<T> v = net.store().find(name);
    if (!v) continue;
    v.mutable_value() = random_tensor<T>(v.shape(), rng, -scale, scale);
  }
}

template <typename T>
struct PairBatch {
  attnreg::nn::Var<T> f, m, f_seg, m_seg;
};

/// Synthetic pairs stacked into a batch, in precision T.
template <typename T>
PairBatch<T> synthetic_batch(attnreg::Dims d, int n, std::uint64_t seed) {
  std::vector<T> f, m, fs, ms;
  for (int i = 0; i < n; ++i) {
    const auto p = attnreg::generate_pair(attnreg::pair_seed(seed, static_cast<std::uint64_t>(i)), d, {});
    f.insert(f.end(), p.fixed.data().begin(), p.fixed.data().end());
    m.insert(m.end(), p.moving.data().begin(), p.moving.data().end());
    for (auto x : p.fixed_mask.data()) fs.push_back(static_cast<T>(x));
    for (auto x : p.moving_mask.data()) ms.push_back(static_cast<T>(x));
  }
  const attnreg::nn::Shape s{n, 1, d.nz, d.ny, d.nx};
  using attnreg::nn::Tensor;
  using attnreg::nn::Var;
  return {Var<T>(Tensor<T>(s, f)), Var<T>(Tensor<T>(s, m)), Var<T>(Tensor<T>(s, fs)), Var<T>(Tensor<T>(s, ms))};
}

enum class Term { l_a, l_d, l_smooth, l_a_seg, l_d_seg, total };

inline const char* term_name(Term t) {
  switch (t) {
    case Term::l_a: return "l_a";
    case Term::l_d: return "l_d";
    case Term::l_smooth: return "l_smooth";
    case Term::l_a_seg: return "l_a_seg";
    case Term::l_d_seg: return "l_d_seg";
    default: return "total";
  }
}

/// One loss term of a full forward pass in training mode.
template <typename T>
attnreg::nn::Var<T> model_loss(const attnreg::RegNet<T>& net, const PairBatch<T>& b, Term term, int window = 3) {
  namespace L = attnreg::losses;
  using attnreg::nn::scale;
  const auto out = net.forward(b.f, b.m, b.m_seg, true);
  const T eps = T(1e-5);
  const auto l_a = scale(L::lncc<T>(b.f, out.m_a, window, eps), T(-1));
  const auto l_d = scale(L::lncc<T>(b.f, out.m_d, window, eps), T(-1));
  const auto l_s = L::smoothness<T>(out.phi);
  const auto l_as = L::soft_dice_loss<T>(b.f_seg, out.seg_a, eps);
  const auto l_ds = L::soft_dice_loss<T>(b.f_seg, out.seg_d, eps);
  switch (term) {
    case Term::l_a: return l_a;
    case Term::l_d: return l_d;
    case Term::l_smooth: return l_s;
    case Term::l_a_seg: return l_as;
    case Term::l_d_seg: return l_ds;
    default: {
      attnreg::LossWeights w;
      w.window = window;
      return L::objective<T>(l_a, l_d, l_s, l_as, l_ds, w, true).total;
    }
  }
}

struct GroupCheck {
  int checked = 0;
  int failures = 0;
  double max_rel = 0.0;
  std::string first_failure;
};

/// Finite-difference check of `loss` on `per_group` coordinates of every parameter group.
template <typename LossFn>
std::map<std::string, GroupCheck> check_groups(attnreg::RegNet<double>& net, LossFn loss, int per_group,
                                               std::uint64_t seed, const oracle::FiniteDiffSpec& spec,
                                               double abs_bound = 1e-4) {
  std::map<std::string, std::vector<attnreg::nn::Var<double>>> groups;
  for (const auto& p : net.store().params()) groups[attnreg::param_group(p.name)].push_back(p.var);
  std::map<std::string, GroupCheck> out;
  std::mt19937_64 rng(seed);
  for (auto& [group, vars] : groups) {
    GroupCheck& g = out[group];
    // Spread the budget over the group's tensors, a few coordinates each.
    std::uniform_int_distribution<std::size_t> pick(0, vars.size() - 1);
    int remaining = per_group;
    while (remaining > 0) {
      const int take = std::min(remaining, 4);
      auto r = check_param(loss, vars[pick(rng)], take, rng, spec, abs_bound);
      g.checked += r.checked;
      g.failures += r.failures;
      g.max_rel = std::max(g.max_rel, r.max_rel);
      if (g.first_failure.empty() && r.failures > 0) g.first_failure = r.first_failure;
      remaining -= take;
    }
  }
  return out;
}

}  // namespace testutil
