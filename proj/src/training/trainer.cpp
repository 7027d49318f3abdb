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

#include <cstdio>
#include <fstream>
#include <random>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"

namespace attnreg {

namespace fs = std::filesystem;

namespace {

StageSummary stage_from_json(const Json& j) {
  StageSummary s;
  s.dice = j.at("dice").get<double>();
  s.prec = j.at("prec").get<double>();
  s.rec = j.at("rec").get<double>();
  s.assd_mm = j.at("assd_mm").get<double>();
  s.jac_nonpos_count = j.value("jac_nonpos_count", std::int64_t{0});
  s.jac_nonpos_percent = j.value("jac_nonpos_percent", 0.0);
  return s;
}

EvalSummary summary_from_json(const Json& j) {
  EvalSummary s;
  s.pairs = j.at("pairs").get<int>();
  s.initial = stage_from_json(j.at("initial"));
  s.has_final = j.contains("final");
  if (s.has_final) {
    s.affine = stage_from_json(j.at("affine"));
    s.final = stage_from_json(j.at("final"));
  }
  return s;
}

class LossLog {
 public:
  explicit LossLog(const fs::path& path) : file_(std::fopen(path.c_str(), "w")), path_(path) {
    if (!file_) throw IoError("cannot write " + path.string());
    std::fputs("step,l_a,l_d,l_smooth,l_a_seg,l_d_seg,total\n", file_);
  }
  ~LossLog() { std::fclose(file_); }
  LossLog(const LossLog&) = delete;
  LossLog& operator=(const LossLog&) = delete;

  void append(std::int64_t step, const LossBreakdown& b) {
    std::fprintf(file_, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(step), b.l_a, b.l_d,
                 b.l_smooth, b.l_a_seg, b.l_d_seg, b.total);
    if (std::fflush(file_) != 0) throw IoError("failed writing " + path_.string());
  }

 private:
  std::FILE* file_;
  fs::path path_;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

std::string first_nonfinite_param(const nn::ParamStore<float>& store) {
  for (const auto& p : store.params()) {
    for (float x : p.var.value().span()) {
      if (!std::isfinite(x)) return p.name;
    }
  }
  return {};
}

}  // namespace

Json to_json(const RunManifest& m) {
  Json ckpts = Json::array();
  for (const auto& c : m.checkpoints) ckpts.push_back(c.filename().string());
  return Json{{"status", "complete"},
              {"config", to_json(m.config)},
              {"steps_done", m.steps_done},
              {"loss_log", m.loss_log.filename().string()},
              {"eval_csv", m.eval_csv.filename().string()},
              {"checkpoints", ckpts},
              {"summary", to_json(m.summary)}};
}

std::optional<RunManifest> load_run_manifest(const fs::path& run_dir) {
  std::ifstream in(run_dir / "run.json");
  if (!in) return std::nullopt;
  try {
    const Json j = Json::parse(in);
    if (j.value("status", "") != "complete") return std::nullopt;
    RunManifest m;
    m.config = train_config_from_json(j.at("config"));
    m.run_dir = run_dir;
    m.steps_done = j.at("steps_done").get<std::int64_t>();
    m.loss_log = run_dir / j.at("loss_log").get<std::string>();
    m.eval_csv = run_dir / j.at("eval_csv").get<std::string>();
    for (const auto& c : j.at("checkpoints")) m.checkpoints.push_back(run_dir / c.get<std::string>());
    m.summary = summary_from_json(j.at("summary"));
    return m;
  } catch (const Json::exception& e) {
    throw IoError("bad run manifest in " + run_dir.string() + ": " + e.what());
  }
}

RunManifest train(const TrainConfig& config, const fs::path& run_dir, const TrainHooks& hooks) {
  config.validate();
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());
  fs::remove(run_dir / "run.json", ec);

  RunManifest manifest;
  manifest.config = config;
  manifest.run_dir = run_dir;
  manifest.loss_log = run_dir / "loss.csv";
  manifest.eval_csv = run_dir / "eval.csv";

  const int threads = worker_threads(config.deterministic);
  const Dims dims = config.model.dims;
  const PairSet eval_set(config.seed, PairSet::Split::eval, config.eval_pairs, dims, config.synth, threads);

  RegNet<float> net(config.model, config.seed);
  nn::AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  nn::Adam<float> adam(net.store(), opts);
  auto save = [&](std::int64_t step) {
    const fs::path dir = run_dir / ("ckpt_" + std::to_string(step));
    save_checkpoint(dir, net, &adam, {step, config.seed});
    manifest.checkpoints.push_back(dir);
  };

  LossLog log(manifest.loss_log);
  if (config.max_steps > 0) {
    const PairSet train_set(config.seed, PairSet::Split::train, config.train_pairs, dims, config.synth, threads);
    std::mt19937_64 rng(pair_seed(config.seed, 0x5a4d91e3ULL));
    std::uniform_int_distribution<int> pick(0, train_set.size() - 1);
    const float eps = static_cast<float>(config.loss.epsilon);
    const int window = config.loss.window;

    for (std::int64_t step = 1; step <= config.max_steps; ++step) {
      std::vector<int> idx(static_cast<std::size_t>(config.batch_size));
      for (int& i : idx) i = pick(rng);
      const Batch b = make_batch(train_set, idx);
      const nn::Var<float> m_seg = config.use_masks ? b.moving_mask : nn::Var<float>();
      const Forward<float> out = net.forward(b.fixed, b.moving, m_seg, true);

      losses::Objective<float> obj;
      try {
        nn::Var<float> l_a_seg, l_d_seg;
        if (config.use_masks) {
          l_a_seg = losses::soft_dice_loss<float>(b.fixed_mask, out.seg_a, eps);
          l_d_seg = losses::soft_dice_loss<float>(b.fixed_mask, out.seg_d, eps);
        }
        obj = losses::objective<float>(nn::scale(losses::lncc<float>(b.fixed, out.m_a, window, eps), -1.0f),
                                       nn::scale(losses::lncc<float>(b.fixed, out.m_d, window, eps), -1.0f),
                                       losses::smoothness<float>(out.phi), l_a_seg, l_d_seg, config.loss,
                                       config.use_masks);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at step " + std::to_string(step) + ": " + e.what());
      }
      nn::backward(obj.total);
      adam.step();
      net.store().zero_grad();
      if (const std::string bad = first_nonfinite_param(net.store()); !bad.empty()) {
        throw NumericError("training aborted at step " + std::to_string(step) + ": parameter " + bad +
                           " became non-finite");
      }
      log.append(step, obj.breakdown);
      if (hooks.on_step) hooks.on_step(step, obj.breakdown);
      if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) save(step);
      manifest.steps_done = step;
    }
  }
  if (manifest.checkpoints.empty() ||
      manifest.checkpoints.back().filename() != "ckpt_" + std::to_string(manifest.steps_done)) {
    save(manifest.steps_done);
  }

  const bool trained = config.max_steps > 0;
  const std::vector<PairEval> evals = trained ? evaluate_pairs(net, eval_set) : evaluate_initial(eval_set);
  manifest.summary = summarize(evals, trained);
  write_eval_csv(manifest.eval_csv, evals, trained);
  write_summary_csv(run_dir / "summary.csv", manifest.summary);
  write_json(run_dir / "run.json", to_json(manifest));
  return manifest;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const fs::path& out_dir, const TrainHooks& hooks) {
  base.validate();
  struct Variant {
    const char* dir;
    AblationFlags flags;
  };
  const Variant variants[] = {{"base", {false, false, false}},
                              {"sam", {true, false, false}},
                              {"cam", {false, true, false}},
                              {"full", {true, true, true}}};
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    TrainConfig cfg = base;
    cfg.model.flags = v.flags;
    const fs::path dir = out_dir / v.dir;
    std::optional<RunManifest> run = load_run_manifest(dir);
    if (!run || !(run->config == cfg)) run = train(cfg, dir, hooks);
    rows.push_back({v.flags.label(), v.flags, run->summary, dir});
  }
  write_ablation_csv(out_dir / "ablation.csv", rows);
  return rows;
}

}  // namespace attnreg
