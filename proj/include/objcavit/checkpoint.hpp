#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "objcavit/config.hpp"
#include "objcavit/core/common.hpp"
#include "objcavit/metrics.hpp"
#include "objcavit/nn.hpp"

namespace objcavit {

// Checkpoint file: magic "OCKP", u32 version, u64 manifest length, the
// JSON manifest (config, step, metric snapshot, tensor directory), then the
// raw little-endian tensor blob.
inline constexpr char kCheckpointMagic[4] = {'O', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamStore<T>& params,
                     std::int64_t step, const MetricSet* metrics = nullptr) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(cfg);
  manifest["step"] = step;
  if (metrics) {
    nlohmann::json m;
    for (const auto& [k, v] : metrics->items()) m[k] = v;
    manifest["metrics"] = m;
  }
  manifest["dtype"] = sizeof(T) == 8 ? "f64" : "f32";
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : params.entries()) {
    dir.push_back({{"name", e.name}, {"shape", e.value.shape}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(e.value.numel()) * sizeof(T);
  }
  manifest["tensors"] = dir;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  const std::string mjson = manifest.dump();
  out.write(kCheckpointMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), 4);
  const std::uint64_t mlen = mjson.size();
  out.write(reinterpret_cast<const char*>(&mlen), 8);
  out.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
  for (const auto& e : params.entries())
    out.write(reinterpret_cast<const char*>(e.value.ptr()),
              static_cast<std::streamsize>(e.value.numel() * sizeof(T)));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

struct CheckpointInfo {
  ModelConfig config;
  std::int64_t step = 0;
};

// Reads just the manifest (for config recovery).
inline CheckpointInfo read_checkpoint_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("checkpoint: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t mlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&mlen), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw parse_error("checkpoint: bad magic in " + path);
  if (version != kCheckpointVersion)
    throw parse_error("checkpoint: unsupported version in " + path);
  std::string mjson(mlen, '\0');
  in.read(mjson.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw parse_error("checkpoint: truncated manifest in " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mjson);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("checkpoint: bad manifest in " + path + ": " + e.what());
  }
  CheckpointInfo info;
  info.config = config_from_json(manifest.at("config"));
  info.step = manifest.value("step", 0);
  return info;
}

// Loads tensors into an already-built parameter store. Every expected name
// and shape is validated; mismatches raise one error listing all diffs.
template <typename T>
std::int64_t load_checkpoint(const std::string& path, ParamStore<T>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("checkpoint: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t mlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&mlen), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw parse_error("checkpoint: bad magic in " + path);
  std::string mjson(mlen, '\0');
  in.read(mjson.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw parse_error("checkpoint: truncated manifest in " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mjson);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("checkpoint: bad manifest in " + path + ": " + e.what());
  }

  const std::string dtype = manifest.value("dtype", "f64");
  const std::size_t elem = dtype == "f64" ? 8 : 4;
  const auto& dir = manifest.at("tensors");

  std::string diffs;
  if (dir.size() != params.size())
    diffs += "  tensor count: file has " + std::to_string(dir.size()) + ", model expects " +
             std::to_string(params.size()) + "\n";
  const std::size_t n = std::min<std::size_t>(dir.size(), params.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = dir[i].at("name").get<std::string>();
    const Shape shape = dir[i].at("shape").get<Shape>();
    const auto& e = params.entries()[i];
    if (name != e.name)
      diffs += "  [" + std::to_string(i) + "] name: file \"" + name + "\" vs model \"" + e.name +
               "\"\n";
    else if (shape != e.value.shape)
      diffs += "  " + name + ": shape file " + shape_str(shape) + " vs model " +
               shape_str(e.value.shape) + "\n";
  }
  if (!diffs.empty())
    throw checkpoint_incompatible_error("checkpoint: " + path +
                                        " incompatible with the model config:\n" + diffs);

  const std::streampos blob_start = in.tellg();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = params.entries()[i];
    const std::uint64_t offset = dir[i].at("offset").get<std::uint64_t>();
    in.seekg(blob_start + static_cast<std::streamoff>(offset));
    if (elem == sizeof(T)) {
      in.read(reinterpret_cast<char*>(e.value.ptr()),
              static_cast<std::streamsize>(e.value.numel() * sizeof(T)));
    } else if (elem == 8) {
      std::vector<double> tmp(static_cast<std::size_t>(e.value.numel()));
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(tmp.size() * sizeof(double)));
      for (std::int64_t k = 0; k < e.value.numel(); ++k) e.value[k] = static_cast<T>(tmp[static_cast<std::size_t>(k)]);
    } else {
      std::vector<float> tmp(static_cast<std::size_t>(e.value.numel()));
      in.read(reinterpret_cast<char*>(tmp.data()),
              static_cast<std::streamsize>(tmp.size() * sizeof(float)));
      for (std::int64_t k = 0; k < e.value.numel(); ++k) e.value[k] = static_cast<T>(tmp[static_cast<std::size_t>(k)]);
    }
    if (!in) throw parse_error("checkpoint: truncated tensor data in " + path);
  }
  return manifest.value("step", 0);
}

}  // namespace objcavit
