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

// `.volr` files: a JSON sidecar `<name>.json` describing dims, spacing and
// dtype, next to a raw little-endian float32 payload `<name>.raw`.

#include <filesystem>

#include "attnreg/field_ops.hpp"
#include "attnreg/volume.hpp"

namespace attnreg {

/// Sidecar path for a pair name; accepts "<name>", "<name>.json", "<name>.raw" or "<name>.volr".
std::filesystem::path volr_sidecar(const std::filesystem::path& path);

Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

/// Masks are stored as volumes restricted to {0.0, 1.0}.
SegMask load_mask(const std::filesystem::path& path);
void save_mask(const SegMask& m, const std::filesystem::path& path);

/// Fields carry "channels": 3 and a channel-major payload.
VectorField load_field(const std::filesystem::path& path);
void save_field(const VectorField& u, const std::filesystem::path& path);

/// Little-endian float32 blobs, shared with the checkpoint format.
void write_f32le(const std::filesystem::path& path, std::span<const float> data);
std::vector<float> read_f32le(const std::filesystem::path& path);

}  // namespace attnreg
