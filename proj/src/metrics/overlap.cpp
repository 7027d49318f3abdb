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

#include "attnreg/metrics.hpp"

namespace attnreg {

Overlap overlap_metrics(const SegMask& f_seg, const SegMask& w_seg) {
  require_same_grid(f_seg.dims(), w_seg.dims(), "overlap_metrics");
  std::int64_t tp = 0, nf = 0, nw = 0;
  const auto f = f_seg.data();
  const auto w = w_seg.data();
  for (std::size_t i = 0; i < f.size(); ++i) {
    nf += f[i] != 0;
    nw += w[i] != 0;
    tp += f[i] != 0 && w[i] != 0;
  }
  Overlap o;
  auto ratio = [&](double num, std::int64_t den) {
    if (den == 0) {
      o.empty_denominator = true;
      return 0.0;
    }
    return num / static_cast<double>(den);
  };
  o.prec = ratio(static_cast<double>(tp), nw);
  o.rec = ratio(static_cast<double>(tp), nf);
  o.dice = ratio(2.0 * static_cast<double>(tp), nf + nw);
  return o;
}

}  // namespace attnreg
