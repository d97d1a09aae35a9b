#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "objcavit/core/common.hpp"

namespace objcavit {

inline constexpr int kTextEmbedDim = 512;

enum class EmbedMode { kMock, kCache, kZeros };

// Frozen text-embedding source. Mock mode draws a unit-norm vector from an
// RNG seeded by a hash of the text; cache mode looks texts up in a binary
// cache; zeros mode returns the all-zero vector (the control ablation).
class EmbeddingProvider {
public:
  using Vec = std::vector<float>;

  static EmbeddingProvider mock(std::uint64_t seed = 0) {
    EmbeddingProvider p;
    p.mode_ = EmbedMode::kMock;
    p.seed_ = seed;
    return p;
  }
  static EmbeddingProvider zeros() {
    EmbeddingProvider p;
    p.mode_ = EmbedMode::kZeros;
    return p;
  }
  static EmbeddingProvider cache(const std::string& path) {
    EmbeddingProvider p;
    p.mode_ = EmbedMode::kCache;
    p.cache_ = load_cache(path);
    return p;
  }

  EmbedMode mode() const { return mode_; }

  Vec embed(const std::string& text) const {
    switch (mode_) {
      case EmbedMode::kZeros:
        return Vec(kTextEmbedDim, 0.0f);
      case EmbedMode::kMock: {
        std::mt19937_64 rng(mix64(fnv1a64(text) ^ mix64(seed_)));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vec v(kTextEmbedDim);
        double norm2 = 0.0;
        for (auto& x : v) {
          const double s = normal(rng);
          x = static_cast<float>(s);
          norm2 += s * s;
        }
        const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (auto& x : v) x *= inv;
        return v;
      }
      case EmbedMode::kCache: {
        auto it = cache_.find(text);
        if (it == cache_.end()) throw missing_embedding_error(text);
        return it->second;
      }
    }
    throw std::logic_error("EmbeddingProvider: unknown mode");
  }

  // Cache file layout: magic "OBJC", version u32, count u32, then repeated
  // (key_len u32, key bytes, 512 little-endian f32) records.
  static void write_cache(const std::string& path,
                          const std::vector<std::pair<std::string, Vec>>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("embedding cache: cannot write " + path);
    out.write("OBJC", 4);
    const std::uint32_t version = 1;
    const std::uint32_t count = static_cast<std::uint32_t>(entries.size());
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [key, vec] : entries) {
      if (vec.size() != kTextEmbedDim)
        throw std::invalid_argument("embedding cache: vector for \"" + key + "\" is not 512-d");
      const std::uint32_t len = static_cast<std::uint32_t>(key.size());
      out.write(reinterpret_cast<const char*>(&len), 4);
      out.write(key.data(), len);
      out.write(reinterpret_cast<const char*>(vec.data()),
                static_cast<std::streamsize>(vec.size() * sizeof(float)));
    }
  }

  static std::unordered_map<std::string, Vec> load_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("embedding cache: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "OBJC", 4) != 0)
      throw parse_error("embedding cache: bad magic in " + path);
    std::uint32_t version = 0, count = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&count), 4);
    if (!in || version != 1)
      throw parse_error("embedding cache: unsupported version in " + path);
    std::unordered_map<std::string, Vec> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      std::uint32_t len = 0;
      in.read(reinterpret_cast<char*>(&len), 4);
      std::string key(len, '\0');
      in.read(key.data(), len);
      Vec vec(kTextEmbedDim);
      in.read(reinterpret_cast<char*>(vec.data()),
              static_cast<std::streamsize>(vec.size() * sizeof(float)));
      if (!in) throw parse_error("embedding cache: truncated record " + std::to_string(i));
      out.emplace(std::move(key), std::move(vec));
    }
    return out;
  }

private:
  EmbedMode mode_ = EmbedMode::kMock;
  std::uint64_t seed_ = 0;
  std::unordered_map<std::string, Vec> cache_;
};

}  // namespace objcavit
