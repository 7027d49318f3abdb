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

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attnreg/checkpoint.hpp"
#include "attnreg/losses.hpp"
#include "attnreg/metrics.hpp"
#include "attnreg/networks.hpp"
#include "attnreg/synth.hpp"

namespace attnreg {

struct TrainConfig {
  ModelConfig model;  // dims and ablation flags live here
  int batch_size = 8;
  double learning_rate = 1e-4;
  std::int64_t max_steps = 2000;
  std::uint64_t seed = 7;
  bool deterministic = false;
  bool use_masks = true;
  std::int64_t checkpoint_every = 500;  // 0 keeps only the final checkpoint
  int train_pairs = 200;
  int eval_pairs = 20;
  LossWeights loss;
  SynthConfig synth;

  /// Collects every problem before throwing a single ValidationError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

Json to_json(const TrainConfig& c);
/// Missing keys keep the values of `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});
Json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const Json& j, LossWeights base = {});
Json to_json(const SynthConfig& s);
SynthConfig synth_config_from_json(const Json& j, SynthConfig base = {});

/// Synthetic pairs drawn from a run seed. Training and evaluation use disjoint index ranges.
class PairSet {
 public:
  enum class Split { train, eval };
  /// Pairs are generated on up to `threads` workers; the result does not depend on the count.
  PairSet(std::uint64_t run_seed, Split split, int count, Dims dims, const SynthConfig& synth, int threads = 1);
  /// Wraps already loaded pairs (dataset directories).
  explicit PairSet(std::vector<SyntheticPair> pairs);

  int size() const { return static_cast<int>(pairs_.size()); }
  const SyntheticPair& operator[](int i) const { return pairs_.at(static_cast<std::size_t>(i)); }

  static std::uint64_t index_base(Split split);

 private:
  std::vector<SyntheticPair> pairs_;
};

/// Network inputs for a list of pairs, stacked along the batch axis.
struct Batch {
  nn::Var<float> fixed, moving, fixed_mask, moving_mask;
};

Batch make_batch(const PairSet& pairs, const std::vector<int>& indices);
nn::Tensor<float> stack_volumes(const std::vector<const Volume*>& vols);
Volume volume_from_tensor(const nn::Tensor<float>& t, int n, Spacing spacing);
VectorField field_from_tensor(const nn::Tensor<float>& t, int n, FieldKind kind);
AffineParams affine_from_tensor(const nn::Tensor<float>& t, int n);

/// One pair scored at the three stages.
struct PairEval {
  int pair_id = 0;
  EvalReport initial, affine, final;
};

/// Mean of each metric per stage.
struct StageSummary {
  double dice = 0.0, prec = 0.0, rec = 0.0, assd_mm = 0.0;
  double jac_nonpos_percent = 0.0;  // final stage only
  std::int64_t jac_nonpos_count = 0;
};

struct EvalSummary {
  StageSummary initial, affine, final;
  int pairs = 0;
  bool has_final = true;  // false when only the initial stage was measured
};

/// Inference on one pair; the net runs in evaluation mode.
struct Registration {
  AffineParams affine;
  Volume m_a, m_d;
  VectorField velocity, phi;
};

Registration register_pair(const RegNet<float>& net, const Volume& fixed, const Volume& moving);

std::vector<PairEval> evaluate_pairs(const RegNet<float>& net, const PairSet& pairs);
/// Initial stage only, without a network.
std::vector<PairEval> evaluate_initial(const PairSet& pairs);
EvalSummary summarize(const std::vector<PairEval>& evals, bool has_final);

void write_eval_csv(const std::filesystem::path& path, const std::vector<PairEval>& evals, bool has_final);
/// One "synthetic" row with Initial/Affine/Final column groups.
void write_summary_csv(const std::filesystem::path& path, const EvalSummary& s);
Json to_json(const EvalSummary& s);

struct RunManifest {
  TrainConfig config;
  std::filesystem::path run_dir;
  std::filesystem::path loss_log;
  std::filesystem::path eval_csv;
  std::vector<std::filesystem::path> checkpoints;
  std::int64_t steps_done = 0;
  EvalSummary summary;
};

Json to_json(const RunManifest& m);

struct TrainHooks {
  /// Called after each step with the logged breakdown.
  std::function<void(std::int64_t step, const LossBreakdown&)> on_step;
};

/// Trains into `run_dir` (created), writing loss.csv, ckpt_<step>/, eval.csv, summary.csv and run.json.
RunManifest train(const TrainConfig& config, const std::filesystem::path& run_dir, const TrainHooks& hooks = {});

/// Reads run.json from a completed run directory.
std::optional<RunManifest> load_run_manifest(const std::filesystem::path& run_dir);

struct AblationRow {
  std::string label;
  AblationFlags flags;
  EvalSummary summary;
  std::filesystem::path run_dir;
};

/// BaseModel, +SAM, +CAM and the full model, trained on identical data. A variant
/// whose run directory already holds a finished run with the same config is reused.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const std::filesystem::path& out_dir,
                                      const TrainHooks& hooks = {});

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

/// Worker count for data generation: 1 in deterministic mode, else the hardware concurrency.
int worker_threads(bool deterministic);

}  // namespace attnreg
