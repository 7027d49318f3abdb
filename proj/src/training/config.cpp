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

#include <cmath>
#include <sstream>

#include "attnreg/error.hpp"
#include "attnreg/training.hpp"

namespace attnreg {

namespace {

template <typename V>
void take(const Json& j, const char* key, V& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const Json::exception&) {
    throw ValidationError(ctx + "." + key + " has the wrong type: " + j.at(key).dump());
  }
}

}  // namespace

Json to_json(const LossWeights& w) {
  return Json{{"lambda_a", w.lambda_a},         {"lambda_d", w.lambda_d},         {"lambda_smooth", w.lambda_smooth},
              {"lambda_a_seg", w.lambda_a_seg}, {"lambda_d_seg", w.lambda_d_seg}, {"window", w.window},
              {"epsilon", w.epsilon}};
}

LossWeights loss_weights_from_json(const Json& j, LossWeights w) {
  reject_unknown_keys(j, {"lambda_a", "lambda_d", "lambda_smooth", "lambda_a_seg", "lambda_d_seg", "window", "epsilon"},
                      "loss");
  take(j, "lambda_a", w.lambda_a, "loss");
  take(j, "lambda_d", w.lambda_d, "loss");
  take(j, "lambda_smooth", w.lambda_smooth, "loss");
  take(j, "lambda_a_seg", w.lambda_a_seg, "loss");
  take(j, "lambda_d_seg", w.lambda_d_seg, "loss");
  take(j, "window", w.window, "loss");
  take(j, "epsilon", w.epsilon, "loss");
  return w;
}

Json to_json(const SynthConfig& s) {
  return Json{{"amplitude", s.amplitude},
              {"max_rotation_deg", s.max_rotation_deg},
              {"max_translation", s.max_translation},
              {"scale_range", s.scale_range},
              {"deform_amplitude", s.deform_amplitude},
              {"deform_sigma", s.deform_sigma},
              {"edge_sharpness", s.edge_sharpness},
              {"texture_contrast", s.texture_contrast},
              {"integration_steps", s.integration_steps},
              {"max_retries", s.max_retries}};
}

SynthConfig synth_config_from_json(const Json& j, SynthConfig s) {
  reject_unknown_keys(j,
                      {"amplitude", "max_rotation_deg", "max_translation", "scale_range", "deform_amplitude",
                       "deform_sigma", "edge_sharpness", "texture_contrast", "integration_steps", "max_retries"},
                      "synth");
  take(j, "amplitude", s.amplitude, "synth");
  take(j, "max_rotation_deg", s.max_rotation_deg, "synth");
  take(j, "max_translation", s.max_translation, "synth");
  take(j, "scale_range", s.scale_range, "synth");
  take(j, "deform_amplitude", s.deform_amplitude, "synth");
  take(j, "deform_sigma", s.deform_sigma, "synth");
  take(j, "edge_sharpness", s.edge_sharpness, "synth");
  take(j, "texture_contrast", s.texture_contrast, "synth");
  take(j, "integration_steps", s.integration_steps, "synth");
  take(j, "max_retries", s.max_retries, "synth");
  return s;
}

Json to_json(const TrainConfig& c) {
  Json model = to_json(c.model);
  model.erase("dims");
  model.erase("flags");
  return Json{{"dims", c.model.dims.str()},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"max_steps", c.max_steps},
              {"seed", c.seed},
              {"deterministic", c.deterministic},
              {"use_masks", c.use_masks},
              {"checkpoint_every", c.checkpoint_every},
              {"train_pairs", c.train_pairs},
              {"eval_pairs", c.eval_pairs},
              {"flags", to_json(c.model.flags)},
              {"loss", to_json(c.loss)},
              {"synth", to_json(c.synth)},
              {"model", model}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  reject_unknown_keys(j,
                      {"dims", "batch_size", "learning_rate", "max_steps", "seed", "deterministic", "use_masks",
                       "checkpoint_every", "train_pairs", "eval_pairs", "flags", "loss", "synth", "model"},
                      "config");
  if (j.contains("dims")) {
    if (!j.at("dims").is_string()) throw ValidationError("config.dims must be a string like 32x32x16");
    c.model.dims = parse_dims(j.at("dims").get<std::string>());
  }
  take(j, "batch_size", c.batch_size, "config");
  take(j, "learning_rate", c.learning_rate, "config");
  take(j, "max_steps", c.max_steps, "config");
  take(j, "seed", c.seed, "config");
  take(j, "deterministic", c.deterministic, "config");
  take(j, "use_masks", c.use_masks, "config");
  take(j, "checkpoint_every", c.checkpoint_every, "config");
  take(j, "train_pairs", c.train_pairs, "config");
  take(j, "eval_pairs", c.eval_pairs, "config");
  if (j.contains("flags")) c.model.flags = flags_from_json(j.at("flags"));
  if (j.contains("loss")) c.loss = loss_weights_from_json(j.at("loss"), c.loss);
  if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"), c.synth);
  if (j.contains("model")) {
    const Json& m = j.at("model");
    if (m.is_object() && (m.contains("dims") || m.contains("flags"))) {
      throw ValidationError("config.model must not set dims or flags; use the top-level keys");
    }
    c.model = model_config_from_json(m, c.model);
  }
  return c;
}

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  auto collect = [&](auto&& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      problems.emplace_back(e.what());
    }
  };
  if (batch_size < 1) problems.emplace_back("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) problems.emplace_back("learning_rate must be positive");
  if (max_steps < 0) problems.emplace_back("max_steps must be non-negative");
  if (checkpoint_every < 0) problems.emplace_back("checkpoint_every must be non-negative");
  if (train_pairs < 1) problems.emplace_back("train_pairs must be at least 1");
  if (eval_pairs < 0) problems.emplace_back("eval_pairs must be non-negative");
  collect([&] { model.validate(); });
  collect([&] { loss.validate(); });
  collect([&] { synth.validate(); });
  if (problems.empty()) return;
  std::ostringstream os;
  os << "invalid configuration:";
  for (const auto& p : problems) os << "\n  - " << p;
  throw ValidationError(os.str());
}

}  // namespace attnreg
