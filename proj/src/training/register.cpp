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
#include "attnreg/training.hpp"

namespace attnreg {

Registration register_pair(const RegNet<float>& net, const Volume& fixed, const Volume& moving) {
  const Dims grid = net.config().dims;
  if (fixed.dims() != grid || moving.dims() != grid) {
    throw ValidationError("inputs " + fixed.dims().str() + " / " + moving.dims().str() +
                          " do not match the checkpoint grid " + grid.str());
  }
  nn::NoGradGuard no_grad;
  const nn::Var<float> f(stack_volumes({&fixed}));
  const nn::Var<float> m(stack_volumes({&moving}));
  const Forward<float> out = net.forward(f, m, nn::Var<float>(), false);
  Registration r;
  r.affine = affine_from_tensor(out.affine.value(), 0);
  r.m_a = volume_from_tensor(out.m_a.value(), 0, moving.spacing());
  r.m_d = volume_from_tensor(out.m_d.value(), 0, moving.spacing());
  r.velocity = field_from_tensor(out.v.value(), 0, FieldKind::velocity);
  r.phi = field_from_tensor(out.phi.value(), 0, FieldKind::displacement);
  r.velocity.check_finite();
  r.phi.check_finite();
  return r;
}

std::vector<PairEval> evaluate_pairs(const RegNet<float>& net, const PairSet& pairs) {
  std::vector<PairEval> out;
  for (int i = 0; i < pairs.size(); ++i) {
    const SyntheticPair& p = pairs[i];
    const Registration r = register_pair(net, p.fixed, p.moving);
    PairEval e;
    e.pair_id = i;
    e.initial = evaluate_stage(p.fixed_mask, p.moving_mask, {}, Stage::initial);
    e.affine = evaluate_stage(p.fixed_mask, p.moving_mask, {r.affine, std::nullopt}, Stage::affine);
    e.final = evaluate_stage(p.fixed_mask, p.moving_mask, {r.affine, r.phi}, Stage::final);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<PairEval> evaluate_initial(const PairSet& pairs) {
  std::vector<PairEval> out;
  for (int i = 0; i < pairs.size(); ++i) {
    PairEval e;
    e.pair_id = i;
    e.initial = evaluate_stage(pairs[i].fixed_mask, pairs[i].moving_mask, {}, Stage::initial);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace attnreg
