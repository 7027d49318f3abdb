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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"
#include "model_fixtures.hpp"

using namespace attnreg;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_run() {
  TrainConfig c;
  c.model = testutil::tiny_config();
  c.model.dims = {12, 12, 8};
  c.model.max_tokens = 64;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.max_steps = 3;
  c.checkpoint_every = 2;
  c.train_pairs = 4;
  c.eval_pairs = 2;
  c.deterministic = true;
  c.loss.window = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename T>
std::vector<T> values(std::span<const T> s) {
  return {s.begin(), s.end()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attnreg_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c = tiny_run();
  c.seed = 99;
  c.use_masks = false;
  c.loss.lambda_smooth = 0.25;
  c.synth.deform_amplitude = 2.5;
  c.model.flags = {true, false, false};
  c.model.scaling = AttentionScaling::model_dim;
  const TrainConfig back = train_config_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(back, c);
}

TEST(TrainConfig, MissingKeysKeepBase) {
  const TrainConfig c = train_config_from_json(Json{{"batch_size", 4}, {"loss", {{"window", 7}}}});
  TrainConfig expected;
  expected.batch_size = 4;
  expected.loss.window = 7;
  EXPECT_EQ(c, expected);
}

TEST(TrainConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(train_config_from_json(Json{{"batch", 4}}), ValidationError);
  EXPECT_THROW(train_config_from_json(Json{{"loss", {{"lambda", 1.0}}}}), ValidationError);
  EXPECT_THROW(train_config_from_json(Json{{"model", {{"dims", "8x8x8"}}}}), ValidationError);
  EXPECT_THROW(train_config_from_json(Json{{"batch_size", "four"}}), ValidationError);
}

TEST(TrainConfig, ValidationReportsEveryProblem) {
  TrainConfig c;
  c.batch_size = 0;
  c.learning_rate = -1.0;
  c.loss.window = 4;
  try {
    c.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("batch_size"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
    EXPECT_NE(msg.find("window"), std::string::npos) << msg;
  }
}

TEST(PairSet, SplitsAreDisjointAndThreadCountIsIrrelevant) {
  const Dims d{12, 12, 8};
  const PairSet train1(7, PairSet::Split::train, 3, d, {}, 1);
  const PairSet train3(7, PairSet::Split::train, 3, d, {}, 3);
  const PairSet eval(7, PairSet::Split::eval, 3, d, {}, 1);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(values(train1[i].fixed.data()), values(train3[i].fixed.data()));
    EXPECT_EQ(values(train1[i].moving.data()), values(train3[i].moving.data()));
    EXPECT_NE(values(train1[i].moving.data()), values(eval[i].moving.data()));
  }
  EXPECT_NE(PairSet::index_base(PairSet::Split::train), PairSet::index_base(PairSet::Split::eval));
}

TEST(Evaluation, FreshModelIsIdentityAtEveryStage) {
  TrainConfig c = tiny_run();
  RegNet<float> net(c.model, 3);
  const PairSet pairs(3, PairSet::Split::eval, 3, c.model.dims, c.synth);
  const auto evals = evaluate_pairs(net, pairs);
  ASSERT_EQ(evals.size(), 3u);
  for (const PairEval& e : evals) {
    EXPECT_EQ(e.initial.dice, e.affine.dice);
    EXPECT_EQ(e.initial.dice, e.final.dice);
    EXPECT_EQ(e.initial.assd_mm, e.final.assd_mm);
    EXPECT_EQ(e.initial.prec, e.final.prec);
    EXPECT_EQ(e.initial.rec, e.final.rec);
    EXPECT_EQ(e.final.jac.value().nonpos_count, 0);
  }
  const Registration r = register_pair(net, pairs[0].fixed, pairs[0].moving);
  EXPECT_EQ(values(r.m_a.data()), values(pairs[0].moving.data()));
  EXPECT_EQ(values(r.m_d.data()), values(pairs[0].moving.data()));
}

TEST(Evaluation, SummaryCsvLayout) {
  EvalSummary s;
  s.pairs = 1;
  s.initial.dice = 0.5;
  s.final.dice = 0.75;
  const fs::path dir = scratch("summary");
  fs::create_directories(dir);
  write_summary_csv(dir / "summary.csv", s);
  std::istringstream lines(slurp(dir / "summary.csv"));
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_EQ(header,
            "class,initial_dice,initial_prec,initial_rec,initial_assd_mm,affine_dice,affine_prec,affine_rec,"
            "affine_assd_mm,final_dice,final_prec,final_rec,final_assd_mm,final_jac_nonpos_percent");
  EXPECT_EQ(row.substr(0, 14), "synthetic,0.5,");
  s.has_final = false;
  write_summary_csv(dir / "summary.csv", s);
  EXPECT_NE(slurp(dir / "summary.csv").find(",,,,,,,,,\n"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Training, DeterministicRunsAreByteIdentical) {
  const TrainConfig c = tiny_run();
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  std::vector<std::int64_t> steps;
  const RunManifest ma = train(c, a, {[&](std::int64_t s, const LossBreakdown&) { steps.push_back(s); }});
  const RunManifest mb = train(c, b);
  EXPECT_EQ(steps, (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_EQ(ma.steps_done, 3);
  ASSERT_EQ(ma.checkpoints.size(), 2u);
  EXPECT_EQ(ma.checkpoints[0].filename(), "ckpt_2");
  EXPECT_EQ(ma.checkpoints[1].filename(), "ckpt_3");

  const std::string log = slurp(a / "loss.csv");
  EXPECT_EQ(log, slurp(b / "loss.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
  for (const char* ck : {"ckpt_2", "ckpt_3"}) {
    int files = 0;
    for (const auto& e : fs::directory_iterator(a / ck)) {
      EXPECT_EQ(slurp(e.path()), slurp(b / ck / e.path().filename())) << e.path();
      ++files;
    }
    EXPECT_GT(files, 10);
  }
  EXPECT_EQ(slurp(a / "eval.csv"), slurp(b / "eval.csv"));

  // The final checkpoint reproduces the trained network.
  const LoadedCheckpoint ck = load_checkpoint(a / "ckpt_3");
  EXPECT_EQ(ck.meta.step, 3);
  EXPECT_EQ(ck.adam_steps, 3);
  const PairSet eval(c.seed, PairSet::Split::eval, c.eval_pairs, c.model.dims, c.synth);
  const EvalSummary s = summarize(evaluate_pairs(*ck.net, eval), true);
  EXPECT_EQ(s.final.dice, ma.summary.final.dice);
  EXPECT_EQ(s.final.assd_mm, ma.summary.final.assd_mm);

  const auto loaded = load_run_manifest(a);
  ASSERT_TRUE(loaded.has_value());
  EXPECT_EQ(loaded->config, c);
  EXPECT_EQ(loaded->steps_done, 3);
  EXPECT_EQ(loaded->summary.final.dice, ma.summary.final.dice);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Training, ZeroStepsEvaluatesInitialStageOnly) {
  TrainConfig c = tiny_run();
  c.max_steps = 0;
  const fs::path dir = scratch("run_zero");
  const RunManifest m = train(c, dir);
  EXPECT_EQ(m.steps_done, 0);
  EXPECT_FALSE(m.summary.has_final);
  ASSERT_EQ(m.checkpoints.size(), 1u);
  EXPECT_EQ(m.checkpoints[0].filename(), "ckpt_0");
  EXPECT_EQ(slurp(dir / "loss.csv").find('\n'), slurp(dir / "loss.csv").size() - 1);
  const std::string eval = slurp(dir / "eval.csv");
  EXPECT_EQ(std::count(eval.begin(), eval.end(), '\n'), 1 + c.eval_pairs);
  fs::remove_all(dir);
}

TEST(Training, InvalidConfigThrowsBeforeWriting) {
  TrainConfig c = tiny_run();
  c.batch_size = -1;
  const fs::path dir = scratch("run_bad");
  EXPECT_THROW(train(c, dir), ValidationError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Ablation, FourVariantsWithSharedInitialColumns) {
  TrainConfig c = tiny_run();
  c.max_steps = 2;
  c.checkpoint_every = 0;
  const fs::path dir = scratch("ablate");
  int steps = 0;
  const auto rows = run_ablation(c, dir, {[&](std::int64_t, const LossBreakdown&) { ++steps; }});
  EXPECT_EQ(steps, 8);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].label, "BaseModel");
  EXPECT_EQ(rows[1].label, "BaseModel + SAM");
  EXPECT_EQ(rows[2].label, "BaseModel + CAM");
  EXPECT_EQ(rows[3].label, "The proposed method");
  for (const auto& r : rows) {
    EXPECT_EQ(r.summary.initial.dice, rows[0].summary.initial.dice);
    EXPECT_EQ(r.summary.initial.assd_mm, rows[0].summary.initial.assd_mm);
    EXPECT_TRUE(r.summary.has_final);
  }
  const std::string csv = slurp(dir / "ablation.csv");
  EXPECT_EQ(csv.substr(0, 20), "method,initial_dice,");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);

  // A second call reuses the finished runs.
  steps = 0;
  const auto again = run_ablation(c, dir, {[&](std::int64_t, const LossBreakdown&) { ++steps; }});
  EXPECT_EQ(steps, 0);
  EXPECT_EQ(again[3].summary.final.dice, rows[3].summary.final.dice);
  fs::remove_all(dir);
}
