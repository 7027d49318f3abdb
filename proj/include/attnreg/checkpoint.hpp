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
#include <memory>

#include "attnreg/networks.hpp"
#include "json.hpp"

namespace attnreg {

using Json = nlohmann::ordered_json;

/// Throws ValidationError listing every key of `j` outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& context);

Json to_json(const AblationFlags& f);
AblationFlags flags_from_json(const Json& j);
Json to_json(const ModelConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});

struct CheckpointMeta {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

/// Writes `dir/manifest.json` plus one raw little-endian float32 file per tensor:
/// parameters, batch-norm statistics and, when given, Adam moments.
void save_checkpoint(const std::filesystem::path& dir, const RegNet<float>& net, const nn::Adam<float>* adam,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<RegNet<float>> net;
  CheckpointMeta meta;
  std::int64_t adam_steps = 0;
  std::vector<nn::Tensor<float>> adam_m, adam_v;  // empty when not saved
};

/// Rebuilds the model described by the manifest and validates every tensor shape.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Copies saved Adam moments into an optimizer bound to `loaded.net`.
void restore_optimizer(const LoadedCheckpoint& loaded, nn::Adam<float>& adam);

}  // namespace attnreg
