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
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"

namespace attnreg {

int worker_threads(bool deterministic) {
  if (deterministic) return 1;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t PairSet::index_base(Split split) { return split == Split::train ? 0 : (std::uint64_t{1} << 40); }

PairSet::PairSet(std::uint64_t run_seed, Split split, int count, Dims dims, const SynthConfig& synth, int threads) {
  if (count < 0) throw ValidationError("pair count must be non-negative");
  synth.validate();
  pairs_.resize(static_cast<std::size_t>(count));
  const std::uint64_t base = index_base(split);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        pairs_[static_cast<std::size_t>(i)] = generate_pair(pair_seed(run_seed, base + static_cast<std::uint64_t>(i)), dims, synth);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, std::max(1, count));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

PairSet::PairSet(std::vector<SyntheticPair> pairs) : pairs_(std::move(pairs)) {}

nn::Tensor<float> stack_volumes(const std::vector<const Volume*>& vols) {
  if (vols.empty()) throw ValidationError("cannot stack an empty list of volumes");
  const Dims d = vols.front()->dims();
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(d.voxels()) * vols.size());
  for (const Volume* v : vols) {
    require_same_grid(v->dims(), d, "batch");
    data.insert(data.end(), v->data().begin(), v->data().end());
  }
  return nn::Tensor<float>({static_cast<std::int64_t>(vols.size()), 1, d.nz, d.ny, d.nx}, std::move(data));
}

Batch make_batch(const PairSet& pairs, const std::vector<int>& indices) {
  std::vector<Volume> fm, mm;
  fm.reserve(indices.size());
  mm.reserve(indices.size());
  std::vector<const Volume*> f, m, fmp, mmp;
  for (int i : indices) {
    const SyntheticPair& p = pairs[i];
    f.push_back(&p.fixed);
    m.push_back(&p.moving);
    fm.push_back(p.fixed_mask.to_volume());
    mm.push_back(p.moving_mask.to_volume());
  }
  for (std::size_t i = 0; i < indices.size(); ++i) {
    fmp.push_back(&fm[i]);
    mmp.push_back(&mm[i]);
  }
  return Batch{nn::Var<float>(stack_volumes(f)), nn::Var<float>(stack_volumes(m)), nn::Var<float>(stack_volumes(fmp)),
               nn::Var<float>(stack_volumes(mmp))};
}

Volume volume_from_tensor(const nn::Tensor<float>& t, int n, Spacing spacing) {
  const Dims d = nn::spatial_dims(t.shape());
  if (t.shape()[1] != 1) throw ValidationError("expected a single-channel tensor, got " + nn::shape_str(t.shape()));
  const auto first = t.span().begin() + static_cast<std::ptrdiff_t>(n * d.voxels());
  return Volume(d, spacing, std::vector<float>(first, first + d.voxels()));
}

VectorField field_from_tensor(const nn::Tensor<float>& t, int n, FieldKind kind) {
  const Dims d = nn::spatial_dims(t.shape());
  if (t.shape()[1] != 3) throw ValidationError("expected a 3-channel tensor, got " + nn::shape_str(t.shape()));
  const auto first = t.span().begin() + static_cast<std::ptrdiff_t>(n * 3 * d.voxels());
  return VectorField(d, kind, std::vector<float>(first, first + 3 * d.voxels()));
}

AffineParams affine_from_tensor(const nn::Tensor<float>& t, int n) {
  if (t.shape().size() != 2 || t.shape()[1] != 12) {
    throw ValidationError("expected affine parameters [N, 12], got " + nn::shape_str(t.shape()));
  }
  AffineParams p;
  std::copy_n(t.span().begin() + n * 12, 12, p.a.begin());
  return p;
}

}  // namespace attnreg
