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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"
#include "attnreg/visualize.hpp"
#include "attnreg/volr_io.hpp"

namespace attnreg::cli {

namespace fs = std::filesystem;

namespace {

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

Json parse_like(const Json& like, const std::string& text, const std::string& flag) {
  auto bad = [&] { return ValidationError("--" + flag + ": cannot parse '" + text + "'"); };
  if (like.is_boolean()) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw bad();
  }
  std::size_t used = 0;
  try {
    if (like.is_number_unsigned()) {
      if (!text.empty() && text[0] == '-') throw bad();
      const auto v = std::stoull(text, &used);
      if (used != text.size()) throw bad();
      return v;
    }
    if (like.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      if (used != text.size()) throw bad();
      return v;
    }
    if (like.is_number_float()) {
      const double v = std::stod(text, &used);
      if (used != text.size()) throw bad();
      return v;
    }
  } catch (const std::logic_error&) {
    throw bad();
  }
  return text;
}

/// Every TrainConfig key exposed as a --kebab-case flag. Keys of the flags and
/// loss sections keep their own names; synth and model keys get a section prefix.
class ConfigFlags {
 public:
  void attach(CLI::App& cmd) {
    const Json defaults = to_json(TrainConfig{});
    for (const auto& [key, value] : defaults.items()) {
      if (key == "seed" || key == "deterministic") continue;  // global flags
      if (value.is_object()) {
        for (const auto& [sub, subval] : value.items()) {
          const bool plain = key == "flags" || key == "loss";
          add(cmd, plain ? sub : key + "_" + sub, {key, sub}, subval);
        }
      } else {
        add(cmd, key, {key}, value);
      }
    }
  }

  /// Writes every flag the user gave into `j`.
  void apply(Json& j) const {
    for (const auto& e : entries_) {
      if (e.text->empty()) continue;
      Json* slot = &j;
      for (const auto& k : e.path) slot = &(*slot)[k];
      *slot = parse_like(e.like, *e.text, e.flag);
    }
  }

 private:
  struct Entry {
    std::string flag;
    std::vector<std::string> path;
    Json like;
    std::shared_ptr<std::string> text;
  };

  void add(CLI::App& cmd, const std::string& key, std::vector<std::string> path, const Json& like) {
    Entry e{kebab(key), std::move(path), like, std::make_shared<std::string>()};
    cmd.add_option("--" + e.flag, *e.text, "config key " + e.path.front() + (e.path.size() > 1 ? "." + e.path[1] : ""))
        ->default_str(like.is_string() ? like.get<std::string>() : like.dump());
    entries_.push_back(std::move(e));
  }

  std::vector<Entry> entries_;
};

struct Globals {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool deterministic = false;
};

/// defaults < config file < flags.
TrainConfig resolve(const Globals& g, const ConfigFlags& flags) {
  TrainConfig base;
  if (!g.config.empty()) base = train_config_from_json(read_json_file(g.config));
  Json j = to_json(base);
  flags.apply(j);
  if (g.seed_given) j["seed"] = g.seed;
  if (g.deterministic) j["deterministic"] = true;
  TrainConfig c = train_config_from_json(j);
  c.validate();
  return c;
}

std::string pair_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%04d", i);
  return buf;
}

int cmd_synth(const Globals& g, const ConfigFlags& flags, int count, const std::string& split, std::ostream& out) {
  if (count < 0) throw ValidationError("--count must be non-negative");
  if (split != "train" && split != "eval") throw ValidationError("--split must be train or eval");
  const TrainConfig c = resolve(g, flags);
  const fs::path dir = g.out.empty() ? fs::path("synth_data") : fs::path(g.out);
  make_dir(dir);
  const PairSet::Split s = split == "train" ? PairSet::Split::train : PairSet::Split::eval;
  const PairSet pairs(c.seed, s, count, c.model.dims, c.synth, worker_threads(c.deterministic));
  Json entries = Json::array();
  for (int i = 0; i < pairs.size(); ++i) {
    const SyntheticPair& p = pairs[i];
    const std::string name = pair_dir_name(i);
    make_dir(dir / name);
    save_volume(p.fixed, dir / name / "fixed.volr");
    save_volume(p.moving, dir / name / "moving.volr");
    save_mask(p.fixed_mask, dir / name / "fixed_mask.volr");
    save_mask(p.moving_mask, dir / name / "moving_mask.volr");
    save_field(p.ground_truth, dir / name / "ground_truth.volr");
    entries.push_back({{"id", i},
                       {"seed", p.seed},
                       {"fixed", name + "/fixed.volr"},
                       {"moving", name + "/moving.volr"},
                       {"fixed_mask", name + "/fixed_mask.volr"},
                       {"moving_mask", name + "/moving_mask.volr"},
                       {"ground_truth", name + "/ground_truth.volr"}});
  }
  write_json_file(dir / "index.json", Json{{"dims", c.model.dims.str()},
                                           {"seed", c.seed},
                                           {"split", split},
                                           {"count", count},
                                           {"synth", to_json(c.synth)},
                                           {"pairs", entries}});
  out << "wrote " << count << " pairs to " << dir.string() << '\n';
  return 0;
}

PairSet load_dataset(const fs::path& dir) {
  const Json index = read_json_file(dir / "index.json");
  std::vector<SyntheticPair> pairs;
  try {
    for (const auto& e : index.at("pairs")) {
      SyntheticPair p;
      p.fixed = load_volume(dir / e.at("fixed").get<std::string>());
      p.moving = load_volume(dir / e.at("moving").get<std::string>());
      p.fixed_mask = load_mask(dir / e.at("fixed_mask").get<std::string>());
      p.moving_mask = load_mask(dir / e.at("moving_mask").get<std::string>());
      p.seed = e.value("seed", std::uint64_t{0});
      pairs.push_back(std::move(p));
    }
  } catch (const Json::exception& e) {
    throw ValidationError("bad dataset index in " + dir.string() + ": " + e.what());
  }
  return PairSet(std::move(pairs));
}

void print_summary(const EvalSummary& s, std::ostream& out) {
  auto line = [&](const char* name, const StageSummary& st) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s dice %.4f  prec %.4f  rec %.4f  assd %.4f mm\n", name, st.dice, st.prec,
                  st.rec, st.assd_mm);
    out << buf;
  };
  line("initial", s.initial);
  if (s.has_final) {
    line("affine", s.affine);
    line("final", s.final);
    out << "final non-positive Jacobian: " << s.final.jac_nonpos_percent << "%\n";
  }
}

TrainHooks progress(std::ostream& out, std::int64_t total) {
  TrainHooks h;
  h.on_step = [&out, total](std::int64_t step, const LossBreakdown& b) {
    if (step % 50 == 0 || step == total) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "step %lld/%lld  total %.5f  l_a %.4f  l_d %.4f\n", static_cast<long long>(step),
                    static_cast<long long>(total), b.total, b.l_a, b.l_d);
      out << buf << std::flush;
    }
  };
  return h;
}

int cmd_train(const Globals& g, const ConfigFlags& flags, std::ostream& out) {
  const TrainConfig c = resolve(g, flags);
  const fs::path dir = g.out.empty() ? fs::path("runs/train") : fs::path(g.out);
  const RunManifest m = train(c, dir, progress(out, c.max_steps));
  print_summary(m.summary, out);
  out << "run written to " << dir.string() << '\n';
  return 0;
}

int cmd_ablate(const Globals& g, const ConfigFlags& flags, std::ostream& out) {
  const TrainConfig c = resolve(g, flags);
  const fs::path dir = g.out.empty() ? fs::path("runs/ablate") : fs::path(g.out);
  run_ablation(c, dir, progress(out, c.max_steps));
  std::ifstream table(dir / "ablation.csv");
  out << table.rdbuf();
  return 0;
}

Json report_json(const EvalReport& r) {
  Json j{{"stage", stage_name(r.stage)}, {"dice", r.dice}, {"prec", r.prec}, {"rec", r.rec}, {"assd_mm", r.assd_mm}};
  if (r.jac) {
    j["jac_nonpos_count"] = r.jac->nonpos_count;
    j["jac_nonpos_percent"] = r.jac->nonpos_percent;
  }
  return j;
}

struct RegisterArgs {
  std::string fixed, moving, checkpoint, fixed_mask, moving_mask;
};

int cmd_register(const Globals& g, const RegisterArgs& a, std::ostream& out) {
  const LoadedCheckpoint ckpt = load_checkpoint(a.checkpoint);
  const Volume f = load_volume(a.fixed);
  const Volume m = load_volume(a.moving);
  const Registration r = register_pair(*ckpt.net, f, m);
  const fs::path dir = g.out.empty() ? fs::path("registered") : fs::path(g.out);
  make_dir(dir);
  save_volume(r.m_a, dir / "m_a.volr");
  save_volume(r.m_d, dir / "m_d.volr");
  save_field(r.phi, dir / "phi.volr");
  save_field(r.velocity, dir / "v.volr");
  write_json_file(dir / "affine.json", Json{{"affine", r.affine.a}});
  if (!a.fixed_mask.empty() && !a.moving_mask.empty()) {
    const SegMask fs_ = load_mask(a.fixed_mask);
    const SegMask ms = load_mask(a.moving_mask);
    Json reports = Json::array();
    reports.push_back(report_json(evaluate_stage(fs_, ms, {}, Stage::initial)));
    reports.push_back(report_json(evaluate_stage(fs_, ms, {r.affine, std::nullopt}, Stage::affine)));
    reports.push_back(report_json(evaluate_stage(fs_, ms, {r.affine, r.phi}, Stage::final)));
    write_json_file(dir / "eval.json", reports);
  } else if (!a.fixed_mask.empty() || !a.moving_mask.empty()) {
    throw ValidationError("--fixed-mask and --moving-mask must be given together");
  }
  out << "registration written to " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& data, std::ostream& out) {
  const LoadedCheckpoint ckpt = load_checkpoint(checkpoint);
  const PairSet pairs = load_dataset(data);
  const fs::path dir = g.out.empty() ? fs::path("eval") : fs::path(g.out);
  make_dir(dir);
  const std::vector<PairEval> evals = evaluate_pairs(*ckpt.net, pairs);
  const EvalSummary s = summarize(evals, true);
  write_eval_csv(dir / "eval.csv", evals, true);
  write_summary_csv(dir / "summary.csv", s);
  print_summary(s, out);
  return 0;
}

struct VisualizeArgs {
  std::string field, fixed, moving, affine_warped, warped;
  int upscale = 8;
  int every = 4;
};

int cmd_visualize(const Globals& g, const VisualizeArgs& a, std::ostream& out) {
  const VectorField u = load_field(a.field);
  const fs::path dir = g.out.empty() ? fs::path("figures") : fs::path(g.out);
  make_dir(dir);
  std::vector<Volume> vols;
  for (const std::string* p : {&a.moving, &a.fixed, &a.affine_warped, &a.warped}) {
    if (!p->empty()) vols.push_back(load_volume(*p));
  }
  Json meta{{"field", a.field}, {"upscale", a.upscale}, {"grid_every", a.every}, {"channels", "x,y,z -> R,G,B"}};
  for (Plane p : {Plane::transversal, Plane::sagittal}) {
    const std::string name = plane_name(p);
    const ColorMap cm = field_rgb(u, p, a.upscale);
    write_png(dir / (name + "_rgb.png"), cm.image);
    write_png(dir / (name + "_grid.png"), field_grid(u, p, a.upscale, a.every));
    meta["range_" + name] = cm.range;
    if (!vols.empty()) {
      std::vector<const Volume*> ptrs;
      for (const auto& v : vols) ptrs.push_back(&v);
      write_png(dir / (name + "_montage.png"), intensity_montage(ptrs, p, a.upscale));
    }
  }
  write_png(dir / "legend.png", range_legend(256, 24));
  write_json_file(dir / "visualize.json", meta);
  out << "figures written to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint affine and diffeomorphic registration with attention"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", g.seed, "run seed");
  app.add_flag("--deterministic", g.deterministic, "single-threaded, bit-reproducible execution");
  app.add_option("--out", g.out, "output directory");

  ConfigFlags synth_flags, train_flags, ablate_flags;
  int count = 10;
  std::string split = "eval";
  auto* synth = app.add_subcommand("synth", "write synthetic pairs as .volr files");
  synth->add_option("--count", count, "number of pairs")->capture_default_str();
  synth->add_option("--split", split, "train or eval index range")->capture_default_str();
  synth_flags.attach(*synth);

  auto* train_cmd = app.add_subcommand("train", "train a model on synthetic pairs");
  train_flags.attach(*train_cmd);
  auto* ablate = app.add_subcommand("ablate", "train the four ablation variants");
  ablate_flags.attach(*ablate);

  RegisterArgs ra;
  auto* reg = app.add_subcommand("register", "register one pair with a checkpoint");
  reg->add_option("--fixed", ra.fixed)->required();
  reg->add_option("--moving", ra.moving)->required();
  reg->add_option("--checkpoint", ra.checkpoint)->required();
  reg->add_option("--fixed-mask", ra.fixed_mask);
  reg->add_option("--moving-mask", ra.moving_mask);

  std::string ckpt, data;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset directory");
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--data", data, "directory with index.json")->required();

  VisualizeArgs va;
  auto* vis = app.add_subcommand("visualize", "render a displacement field as PNG");
  vis->add_option("--field", va.field)->required();
  vis->add_option("--fixed", va.fixed);
  vis->add_option("--moving", va.moving);
  vis->add_option("--affine-warped", va.affine_warped);
  vis->add_option("--warped", va.warped);
  vis->add_option("--upscale", va.upscale)->capture_default_str();
  vis->add_option("--grid-every", va.every)->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (synth->parsed()) return cmd_synth(g, synth_flags, count, split, out);
    if (train_cmd->parsed()) return cmd_train(g, train_flags, out);
    if (ablate->parsed()) return cmd_ablate(g, ablate_flags, out);
    if (reg->parsed()) return cmd_register(g, ra, out);
    if (eval->parsed()) return cmd_eval(g, ckpt, data, out);
    if (vis->parsed()) return cmd_visualize(g, va, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace attnreg::cli
