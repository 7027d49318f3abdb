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

#include "attnreg/checkpoint.hpp"

#include <fstream>
#include <map>

#include "attnreg/error.hpp"
#include "attnreg/volr_io.hpp"

namespace attnreg {

namespace fs = std::filesystem;

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!j.is_object()) throw ValidationError(context + ": expected a JSON object");
  std::string bad;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (!bad.empty()) throw ValidationError(context + ": unknown key(s) " + bad);
}

Json to_json(const AblationFlags& f) {
  return Json{{"use_sam", f.use_sam}, {"use_cam", f.use_cam}, {"use_gfm", f.use_gfm}};
}

AblationFlags flags_from_json(const Json& j) {
  reject_unknown_keys(j, {"use_sam", "use_cam", "use_gfm"}, "flags");
  AblationFlags f;
  f.use_sam = j.value("use_sam", f.use_sam);
  f.use_cam = j.value("use_cam", f.use_cam);
  f.use_gfm = j.value("use_gfm", f.use_gfm);
  return f;
}

Json to_json(const ModelConfig& c) {
  return Json{{"dims", {c.dims.nx, c.dims.ny, c.dims.nz}},
              {"affine_stages", c.affine_stages},
              {"affine_base", c.affine_base},
              {"affine_max_channels", c.affine_max_channels},
              {"encoder_levels", c.encoder_levels},
              {"encoder_base", c.encoder_base},
              {"token_dim", c.token_dim},
              {"heads", c.heads},
              {"tem_layers", c.tem_layers},
              {"mlp_ratio", c.mlp_ratio},
              {"max_tokens", c.max_tokens},
              {"scaling", c.scaling == AttentionScaling::per_head ? "per_head" : "model_dim"},
              {"leaky_slope", c.leaky_slope},
              {"bn_momentum", c.bn_momentum},
              {"bn_eps", c.bn_eps},
              {"ln_eps", c.ln_eps},
              {"integration_steps", c.integration_steps},
              {"flags", to_json(c.flags)}};
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  reject_unknown_keys(j,
                      {"dims", "affine_stages", "affine_base", "affine_max_channels", "encoder_levels",
                       "encoder_base", "token_dim", "heads", "tem_layers", "mlp_ratio", "max_tokens", "scaling",
                       "leaky_slope", "bn_momentum", "bn_eps", "ln_eps", "integration_steps", "flags"},
                      "model");
  try {
    if (j.contains("dims")) {
      const auto d = j.at("dims");
      if (d.is_string()) {
        c.dims = parse_dims(d.get<std::string>());
      } else {
        const auto v = d.get<std::vector<int>>();
        if (v.size() != 3) throw ValidationError("model.dims needs 3 entries");
        c.dims = Dims{v[0], v[1], v[2]};
      }
    }
    c.affine_stages = j.value("affine_stages", c.affine_stages);
    c.affine_base = j.value("affine_base", c.affine_base);
    c.affine_max_channels = j.value("affine_max_channels", c.affine_max_channels);
    c.encoder_levels = j.value("encoder_levels", c.encoder_levels);
    c.encoder_base = j.value("encoder_base", c.encoder_base);
    c.token_dim = j.value("token_dim", c.token_dim);
    c.heads = j.value("heads", c.heads);
    c.tem_layers = j.value("tem_layers", c.tem_layers);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    if (j.contains("scaling")) {
      const auto s = j.at("scaling").get<std::string>();
      if (s == "per_head") {
        c.scaling = AttentionScaling::per_head;
      } else if (s == "model_dim") {
        c.scaling = AttentionScaling::model_dim;
      } else {
        throw ValidationError("model.scaling must be per_head or model_dim, got " + s);
      }
    }
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.bn_eps = j.value("bn_eps", c.bn_eps);
    c.ln_eps = j.value("ln_eps", c.ln_eps);
    c.integration_steps = j.value("integration_steps", c.integration_steps);
    if (j.contains("flags")) c.flags = flags_from_json(j.at("flags"));
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  return c;
}

namespace {

struct TensorRef {
  std::string name;
  std::string role;
  const nn::Tensor<float>* value;
};

std::vector<TensorRef> collect(const RegNet<float>& net, const nn::Adam<float>* adam) {
  std::vector<TensorRef> out;
  const auto& params = net.store().params();
  for (const auto& p : params) out.push_back({p.name, "param", &p.var.value()});
  for (const auto& s : net.store().states()) {
    out.push_back({s.name + ".running_mean", "bn_mean", &s.state.running_mean});
    out.push_back({s.name + ".running_var", "bn_var", &s.state.running_var});
  }
  if (adam) {
    const auto& a = *adam;
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.push_back({params[i].name + ".adam_m", "adam_m", &a.first_moments()[i]});
      out.push_back({params[i].name + ".adam_v", "adam_v", &a.second_moments()[i]});
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const RegNet<float>& net, const nn::Adam<float>* adam,
                     const CheckpointMeta& meta) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  Json tensors = Json::array();
  for (const auto& t : collect(net, adam)) {
    const std::string file = t.name + ".raw";
    write_f32le(dir / file, t.value->span());
    tensors.push_back({{"name", t.name}, {"role", t.role}, {"shape", t.value->shape()}, {"file", file}});
  }
  Json manifest{{"format", "attnreg-checkpoint"},
                {"version", 1},
                {"step", meta.step},
                {"seed", meta.seed},
                {"flags", to_json(net.config().flags)},
                {"model", to_json(net.config())},
                {"adam_steps", adam ? adam->step_count() : 0},
                {"tensors", tensors}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::exception& e) {
    throw IoError("bad checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "attnreg-checkpoint") {
    throw IoError(dir.string() + " is not a checkpoint directory");
  }
  LoadedCheckpoint r;
  r.meta.step = manifest.at("step").get<std::int64_t>();
  r.meta.seed = manifest.at("seed").get<std::uint64_t>();
  r.adam_steps = manifest.value("adam_steps", std::int64_t{0});
  ModelConfig cfg = model_config_from_json(manifest.at("model"));
  if (manifest.contains("flags") && flags_from_json(manifest.at("flags")) != cfg.flags) {
    throw ValidationError("checkpoint flags disagree with its model config");
  }
  r.net = std::make_unique<RegNet<float>>(cfg, r.meta.seed);

  std::map<std::string, std::pair<nn::Shape, fs::path>> saved;
  for (const auto& t : manifest.at("tensors")) {
    saved[t.at("name").get<std::string>()] = {t.at("shape").get<nn::Shape>(), dir / t.at("file").get<std::string>()};
  }
  auto read = [&](const std::string& name, const nn::Shape& shape) {
    const auto it = saved.find(name);
    if (it == saved.end()) throw ValidationError("checkpoint is missing tensor " + name);
    if (it->second.first != shape) {
      throw ValidationError("checkpoint tensor " + name + " has shape " + nn::shape_str(it->second.first) +
                            ", model expects " + nn::shape_str(shape));
    }
    nn::Tensor<float> t(shape, read_f32le(it->second.second));
    saved.erase(it);
    return t;
  };
  for (const auto& p : r.net->store().params()) {
    nn::Var<float> v = p.var;
    v.mutable_value() = read(p.name, v.shape());
  }
  for (auto& s : r.net->store().states()) {
    s.state.running_mean = read(s.name + ".running_mean", s.state.running_mean.shape());
    s.state.running_var = read(s.name + ".running_var", s.state.running_var.shape());
  }
  const bool has_adam = saved.count(r.net->store().params().front().name + ".adam_m") > 0;
  if (has_adam) {
    for (const auto& p : r.net->store().params()) {
      r.adam_m.push_back(read(p.name + ".adam_m", p.var.shape()));
      r.adam_v.push_back(read(p.name + ".adam_v", p.var.shape()));
    }
  }
  if (!saved.empty()) throw ValidationError("checkpoint has unexpected tensor " + saved.begin()->first);
  return r;
}

void restore_optimizer(const LoadedCheckpoint& loaded, nn::Adam<float>& adam) {
  if (loaded.adam_m.empty()) throw ValidationError("checkpoint holds no optimizer state");
  adam.first_moments() = loaded.adam_m;
  adam.second_moments() = loaded.adam_v;
  adam.set_step_count(loaded.adam_steps);
}

}  // namespace attnreg
