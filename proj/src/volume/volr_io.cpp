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

#include "attnreg/volr_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "attnreg/error.hpp"
#include "json.hpp"

namespace attnreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

struct Header {
  Dims dims;
  Spacing spacing{1.0, 1.0, 1.0};
  int channels = 1;
  FieldKind kind = FieldKind::displacement;
  fs::path raw;
};

Header read_header(const fs::path& path) {
  const fs::path sidecar = volr_sidecar(path);
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open " + sidecar.string());
  Header h;
  try {
    const json j = json::parse(in);
    const auto dims = j.at("dims").get<std::vector<int>>();
    const auto spacing = j.at("spacing").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3) throw IoError("dims and spacing need 3 entries");
    if (j.at("dtype").get<std::string>() != "f32le") throw IoError("unsupported dtype in " + sidecar.string());
    h.dims = Dims{dims[0], dims[1], dims[2]};
    h.spacing = {spacing[0], spacing[1], spacing[2]};
    h.channels = j.value("channels", 1);
    if (j.value("kind", std::string("displacement")) == "velocity") h.kind = FieldKind::velocity;
    h.raw = sidecar.parent_path() / j.at("data").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError("bad sidecar " + sidecar.string() + ": " + e.what());
  }
  return h;
}

void write_header(const fs::path& path, const Dims& d, const Spacing& s, int channels, const FieldKind* kind) {
  const fs::path sidecar = volr_sidecar(path);
  json j;
  j["dims"] = {d.nx, d.ny, d.nz};
  j["spacing"] = {s[0], s[1], s[2]};
  j["dtype"] = "f32le";
  j["data"] = sidecar.stem().string() + ".raw";
  if (channels != 1) j["channels"] = channels;
  if (kind) j["kind"] = *kind == FieldKind::velocity ? "velocity" : "displacement";
  if (!sidecar.parent_path().empty()) fs::create_directories(sidecar.parent_path());
  std::ofstream out(sidecar);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + sidecar.string());
}

std::vector<float> read_payload(const Header& h) {
  auto data = read_f32le(h.raw);
  const auto expected = static_cast<std::size_t>(h.channels * h.dims.voxels());
  if (data.size() != expected) {
    throw IoError("payload " + h.raw.string() + " holds " + std::to_string(data.size()) +
                  " floats, dims " + h.dims.str() + " x " + std::to_string(h.channels) + " need " +
                  std::to_string(expected));
  }
  return data;
}

}  // namespace

fs::path volr_sidecar(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json") return path;
  fs::path p = path;
  if (ext == ".raw" || ext == ".volr") p.replace_extension();
  p += ".json";
  return p;
}

void write_f32le(const fs::path& path, std::span<const float> data) {
  std::vector<std::uint32_t> words(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) words[i] = to_little(std::bit_cast<std::uint32_t>(data[i]));
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw IoError("cannot write " + path.string());
}

std::vector<float> read_f32le(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 4 != 0) throw IoError(path.string() + " size is not a multiple of 4 bytes");
  std::vector<std::uint32_t> words(bytes / 4);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("short read from " + path.string());
  std::vector<float> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) out[i] = std::bit_cast<float>(to_little(words[i]));
  return out;
}

Volume load_volume(const fs::path& path) {
  const Header h = read_header(path);
  if (h.channels != 1) throw IoError(volr_sidecar(path).string() + " is not a scalar volume");
  Volume v(h.dims, h.spacing, read_payload(h));
  v.check_finite();
  return v;
}

void save_volume(const Volume& v, const fs::path& path) {
  v.check_finite();
  write_header(path, v.dims(), v.spacing(), 1, nullptr);
  write_f32le(volr_sidecar(path).replace_extension(".raw"), v.data());
}

SegMask load_mask(const fs::path& path) {
  const Volume v = load_volume(path);
  std::vector<std::uint8_t> bits(v.data().size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const float x = v.data()[i];
    if (x != 0.0f && x != 1.0f) {
      throw ValidationError("mask value " + std::to_string(x) + " at voxel index " + std::to_string(i) +
                            " is not 0 or 1");
    }
    bits[i] = x == 1.0f;
  }
  return SegMask(v.dims(), v.spacing(), std::move(bits));
}

void save_mask(const SegMask& m, const fs::path& path) { save_volume(m.to_volume(), path); }

VectorField load_field(const fs::path& path) {
  const Header h = read_header(path);
  if (h.channels != 3) throw IoError(volr_sidecar(path).string() + " is not a 3-channel field");
  VectorField u(h.dims, h.kind, read_payload(h));
  u.check_finite();
  return u;
}

void save_field(const VectorField& u, const fs::path& path) {
  u.check_finite();
  const FieldKind kind = u.kind();
  write_header(path, u.dims(), {1.0, 1.0, 1.0}, 3, &kind);
  write_f32le(volr_sidecar(path).replace_extension(".raw"), u.data());
}

}  // namespace attnreg
