// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
#pragma once

// Checkpoint = JSON manifest + raw blob of little-endian float32 values.
//
//   { "format_version": 1, "blob": "<file>.bin", "config": {...},
//     "tensors": [ {"name", "shape", "dtype": "float32", "byte_offset"} ] }
//
// Tensors are stored back to back in manifest (lexicographic) order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "taylorse/autodiff/params.hpp"
#include "taylorse/error.hpp"

namespace taylorse::ad {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_f32le(std::string& buf, float v) {
  auto u = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

inline float get_f32le(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace detail

inline std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

// Writes `manifest` and its sibling blob. `config` is stored verbatim.
template <class T>
void save_checkpoint(const std::filesystem::path& manifest, const ParamStore<T>& store,
                     const nlohmann::json& config) {
  nlohmann::ordered_json m;
  m["format_version"] = kCheckpointVersion;
  const auto blob = blob_path_for(manifest);
  m["blob"] = blob.filename().string();
  m["config"] = config;
  auto tensors = nlohmann::ordered_json::array();
  std::string bytes;
  for (const auto& [name, p] : store) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = p.value.shape();
    e["dtype"] = "float32";
    e["byte_offset"] = bytes.size();
    tensors.push_back(e);
    for (T v : p.value.data()) detail::put_f32le(bytes, static_cast<float>(v));
  }
  m["tensors"] = tensors;

  std::ofstream mf(manifest, std::ios::binary);
  if (!mf) throw DataError("cannot write checkpoint manifest " + manifest.string());
  mf << m.dump(2) << '\n';
  std::ofstream bf(blob, std::ios::binary);
  if (!bf) throw DataError("cannot write checkpoint blob " + blob.string());
  bf.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!mf || !bf) throw DataError("short write on checkpoint " + manifest.string());
}

struct CheckpointData {
  nlohmann::json config;
  ParamStore<float> params;
};

inline CheckpointData load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream mf(manifest);
  if (!mf) throw DataError("cannot open checkpoint " + manifest.string());
  nlohmann::json m;
  try {
    mf >> m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint manifest " + manifest.string() + ": " +
                    e.what());
  }
  if (!m.contains("format_version"))
    throw DataError("checkpoint " + manifest.string() + " has no format_version");
  if (m["format_version"].get<int>() != kCheckpointVersion)
    throw DataError("unsupported checkpoint format_version " +
                    m["format_version"].dump());
  const auto blob = manifest.parent_path() / m.at("blob").get<std::string>();
  std::ifstream bf(blob, std::ios::binary);
  if (!bf) throw DataError("cannot open checkpoint blob " + blob.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bf)),
                                   std::istreambuf_iterator<char>());
  CheckpointData out;
  out.config = m.value("config", nlohmann::json::object());
  for (const auto& e : m.at("tensors")) {
    if (e.at("dtype").get<std::string>() != "float32")
      throw DataError("unsupported dtype " + e.at("dtype").dump());
    Shape shape = e.at("shape").get<Shape>();
    const std::size_t off = e.at("byte_offset").get<std::size_t>();
    const std::size_t n = numel(shape);
    if (off + 4 * n > bytes.size())
      throw DataError("checkpoint blob too short for tensor " +
                      e.at("name").get<std::string>());
    Tensor<float> t(shape);
    for (std::size_t i = 0; i < n; ++i) t[i] = detail::get_f32le(bytes.data() + off + 4 * i);
    out.params.add(e.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

}  // namespace taylorse::ad
