#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace objcavit {

// Thrown when an input file does not match the expected schema. The message
// names the offending record/field (or the byte position for syntax errors).
class parse_error : public std::runtime_error {
public:
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a requested text key is absent from an embedding cache.
class missing_embedding_error : public std::runtime_error {
public:
  explicit missing_embedding_error(const std::string& text)
      : std::runtime_error("missing embedding for text: \"" + text + "\""), text_(text) {}
  const std::string& text() const { return text_; }

private:
  std::string text_;
};

// Thrown when a ground-truth raster has no valid pixels.
class empty_ground_truth_error : public std::runtime_error {
public:
  explicit empty_ground_truth_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a checkpoint's parameter set does not match the model built
// from the active config. The message lists every name/shape diff.
class checkpoint_incompatible_error : public std::runtime_error {
public:
  explicit checkpoint_incompatible_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown during evaluation when auxiliary inputs are missing for an image.
class evaluation_error : public std::runtime_error {
public:
  explicit evaluation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used to derive deterministic per-key RNG seeds.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

// splitmix64, used to combine seeds without correlated streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

// CRC-32 (IEEE 802.3), used for split manifests.
inline std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::uint32_t t[256];
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    struct Table { std::uint32_t v[256]; };
    Table out{};
    for (int i = 0; i < 256; ++i) out.v[i] = t[i];
    return out;
  }();
  const auto* p = static_cast<const unsigned char*>(data);
  crc = ~crc;
  for (std::size_t i = 0; i < n; ++i) crc = table.v[(crc ^ p[i]) & 0xffu] ^ (crc >> 8);
  return ~crc;
}

}  // namespace objcavit
