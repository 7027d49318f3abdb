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

#include "attnreg/training.hpp"
#include "attnreg/visualize.hpp"
#include "attnreg/volr_io.hpp"
#include "cli.hpp"
#include "model_fixtures.hpp"

using namespace attnreg;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attnreg_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::vector<std::string> kTiny{"--dims", "12x12x8", "--model-affine-base", "4", "--model-affine-max-channels",
                                     "16", "--model-encoder-levels", "2", "--model-encoder-base", "4",
                                     "--model-token-dim", "24", "--model-heads", "2", "--model-tem-layers", "2"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST(Cli, SynthWritesDeterministicPairs) {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  const Result ra = run(with({"--seed", "5", "--out", a.string(), "synth", "--count", "3"}, {"--dims", "12x12x8"}));
  ASSERT_EQ(ra.code, 0) << ra.err;
  const Result rb = run({"--out", b.string(), "--seed", "5", "synth", "--count", "3", "--dims", "12x12x8"});
  ASSERT_EQ(rb.code, 0) << rb.err;
  for (const char* f : {"fixed", "moving", "fixed_mask", "moving_mask", "ground_truth"}) {
    for (int i = 0; i < 3; ++i) {
      for (const char* ext : {".json", ".raw"}) {
        const std::string rel = "pair_000" + std::to_string(i) + "/" + f + ext;
        ASSERT_TRUE(fs::exists(a / rel)) << rel;
        EXPECT_EQ(slurp(a / rel), slurp(b / rel)) << rel;
      }
    }
  }
  const Json index = Json::parse(slurp(a / "index.json"));
  EXPECT_EQ(index["count"], 3);
  EXPECT_EQ(index["pairs"].size(), 3u);
  EXPECT_EQ(load_volume(a / "pair_0000/fixed.volr").dims(), (Dims{12, 12, 8}));

  const fs::path c = scratch("synth_c");
  EXPECT_EQ(run({"--seed", "6", "--out", c.string(), "synth", "--count", "1", "--dims", "12x12x8"}).code, 0);
  EXPECT_NE(slurp(a / "pair_0000/moving.raw"), slurp(c / "pair_0000/moving.raw"));

  const fs::path z = scratch("synth_zero");
  EXPECT_EQ(run({"--out", z.string(), "synth", "--count", "0"}).code, 0);
  EXPECT_EQ(Json::parse(slurp(z / "index.json"))["pairs"].size(), 0u);
  for (const auto& p : {a, b, c, z}) fs::remove_all(p);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"train", "--no-such-flag", "1"}).code, 1);
  EXPECT_EQ(run({"train", "--batch-size", "0"}).code, 1);
  EXPECT_EQ(run({"synth", "--count", "-1"}).code, 1);
  const Result r = run({"eval", "--checkpoint", "/nonexistent/ckpt", "--data", "/nonexistent"});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());

  const fs::path cfg = scratch("bad_config.json");
  std::ofstream(cfg) << R"({"batch_size": 2, "mystery": 1})";
  const Result bad = run({"--config", cfg.string(), "train"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("mystery"), std::string::npos) << bad.err;
  fs::remove(cfg);
}

TEST(Cli, TrainFlagsOverrideConfigFile) {
  const fs::path cfg = scratch("config.json");
  std::ofstream(cfg) << R"({"batch_size": 3, "max_steps": 0, "eval_pairs": 2, "train_pairs": 2, "seed": 11})";
  const fs::path out = scratch("train");
  const Result r = run(with({"--config", cfg.string(), "--seed", "12", "--out", out.string(), "train", "--batch-size", "2"}, kTiny));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = load_run_manifest(out);
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->config.batch_size, 2);
  EXPECT_EQ(m->config.max_steps, 0);
  EXPECT_EQ(m->config.seed, 12u);
  EXPECT_EQ(m->config.model.token_dim, 24);
  EXPECT_TRUE(fs::exists(out / "ckpt_0" / "manifest.json"));
  fs::remove(cfg);
  fs::remove_all(out);
}

TEST(Cli, RegisterAndEvalWithIdentityCheckpoint) {
  const fs::path data = scratch("eval_data"), run_dir = scratch("eval_run"), reg = scratch("reg"), ev = scratch("eval");
  ASSERT_EQ(run({"--out", data.string(), "synth", "--count", "2", "--dims", "12x12x8"}).code, 0);
  ASSERT_EQ(run(with({"--out", run_dir.string(), "train", "--max-steps", "0", "--eval-pairs", "1"}, kTiny)).code, 0);
  const std::string ckpt = (run_dir / "ckpt_0").string();

  const Result r = run({"--out", reg.string(), "register", "--fixed", (data / "pair_0000/fixed.volr").string(),
                        "--moving", (data / "pair_0000/moving.volr").string(), "--checkpoint", ckpt, "--fixed-mask",
                        (data / "pair_0000/fixed_mask.volr").string(), "--moving-mask",
                        (data / "pair_0000/moving_mask.volr").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Volume moving = load_volume(data / "pair_0000/moving.volr");
  const Volume m_d = load_volume(reg / "m_d.volr");
  EXPECT_TRUE(std::equal(moving.data().begin(), moving.data().end(), m_d.data().begin()));
  const Json reports = Json::parse(slurp(reg / "eval.json"));
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0]["dice"], reports[2]["dice"]);
  EXPECT_EQ(reports[2]["jac_nonpos_count"], 0);

  const Result e = run({"--out", ev.string(), "eval", "--checkpoint", ckpt, "--data", data.string()});
  ASSERT_EQ(e.code, 0) << e.err;
  std::istringstream rows(slurp(ev / "summary.csv"));
  std::string header, row;
  std::getline(rows, header);
  std::getline(rows, row);
  std::vector<std::string> cells;
  std::stringstream ss(row);
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  ASSERT_EQ(cells.size(), 14u);
  for (int k = 1; k <= 4; ++k) {
    EXPECT_EQ(cells[k], cells[k + 4]);
    EXPECT_EQ(cells[k], cells[k + 8]);
  }
  EXPECT_EQ(cells[13], "0");
  for (const auto& p : {data, run_dir, reg, ev}) fs::remove_all(p);
}

TEST(Cli, VisualizeZeroAndTranslatedFields) {
  const fs::path dir = scratch("vis");
  fs::create_directories(dir);
  const Dims d{16, 12, 8};
  VectorField zero(d, FieldKind::displacement);
  save_field(zero, dir / "zero.volr");
  VectorField shift(d, FieldKind::displacement);
  for (float& x : shift.channel(0)) x = 2.0f;
  save_field(shift, dir / "shift.volr");

  ASSERT_EQ(run({"--out", (dir / "z").string(), "visualize", "--field", (dir / "zero.volr").string()}).code, 0);
  ASSERT_EQ(run({"--out", (dir / "s").string(), "visualize", "--field", (dir / "shift.volr").string()}).code, 0);

  const RgbImage rgb = read_png(dir / "z" / "transversal_rgb.png");
  EXPECT_EQ(rgb.width, 16 * 8);
  EXPECT_EQ(rgb.height, 12 * 8);
  for (auto b : rgb.rgb) ASSERT_EQ(b, 128);
  const RgbImage sag = read_png(dir / "z" / "sagittal_rgb.png");
  EXPECT_EQ(sag.width, 12 * 8);
  EXPECT_EQ(sag.height, 8 * 8);

  // Lines every 4 voxels pass through block centres: pixel 8 * i + 4.
  const RgbImage g0 = read_png(dir / "z" / "transversal_grid.png");
  const RgbImage g1 = read_png(dir / "s" / "transversal_grid.png");
  const int y = 2 * 8;  // between horizontal lines
  auto dark = [&](const RgbImage& img, int x) { return img.pixel(x, y)[0] == 0; };
  for (int x = 0; x < g0.width; ++x) {
    const bool line = x % 32 == 4 && x <= 8 * 15;
    EXPECT_EQ(dark(g0, x), line) << x;
    // The x translation of 2 voxels moves every vertical line 16 pixels right.
    EXPECT_EQ(dark(g1, x), x >= 16 && dark(g0, x - 16)) << x;
  }
  const RgbImage tr = read_png(dir / "s" / "transversal_rgb.png");
  EXPECT_EQ(tr.pixel(3, 3)[0], 255);
  EXPECT_EQ(tr.pixel(3, 3)[1], 128);
  fs::remove_all(dir);
}
