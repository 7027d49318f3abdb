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
#include "attnreg/metrics.hpp"

namespace attnreg {

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::initial: return "initial";
    case Stage::affine: return "affine";
    case Stage::final: return "final";
  }
  return "?";
}

std::optional<VectorField> chain_displacement(const TransformChain& chain, Dims dims) {
  std::optional<VectorField> u;
  if (chain.affine) u = affine_to_displacement(*chain.affine, dims);
  if (chain.phi) {
    require_same_grid(chain.phi->dims(), dims, "transform chain");
    u = u ? compose(*u, *chain.phi) : *chain.phi;
  }
  return u;
}

EvalReport evaluate_stage(const SegMask& f_seg, const SegMask& m_seg, const TransformChain& chain, Stage stage) {
  require_same_grid(f_seg.dims(), m_seg.dims(), "evaluate_stage");
  if (stage == Stage::initial && (chain.affine || chain.phi)) {
    throw ValidationError("initial stage takes an empty transform chain");
  }
  if (stage == Stage::affine && chain.phi) throw ValidationError("affine stage takes no deformation");
  if (stage == Stage::final && !chain.phi) throw ValidationError("final stage needs a deformation");

  const auto u = chain_displacement(chain, f_seg.dims());
  const SegMask w = u ? warp(m_seg, *u) : m_seg;
  const Overlap o = overlap_metrics(f_seg, w);
  EvalReport r;
  r.stage = stage;
  r.dice = o.dice;
  r.prec = o.prec;
  r.rec = o.rec;
  r.assd_mm = assd(f_seg, w, f_seg.spacing());
  if (stage == Stage::final) r.jac = jacobian_stats(*chain.phi);
  return r;
}

}  // namespace attnreg
