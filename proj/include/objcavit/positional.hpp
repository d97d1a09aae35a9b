#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "objcavit/nn.hpp"

namespace objcavit {

enum class PosVariant { kPos, kPosBboxWh };

inline int pos_input_dim(PosVariant v) { return v == PosVariant::kPos ? 2 : 4; }

// MLP positional encoder: (2|4) -> 32 -> 64 -> 128 -> 256 -> embed, with
// LeakyReLU(0.01) between all layers but the last. Inputs are centre
// coordinates (and optionally width/height) normalized to [0,1] by the
// image dims.
template <typename T>
struct PositionalEncoder {
  PosVariant variant = PosVariant::kPos;
  std::vector<Linear<T>> layers;

  static constexpr T kLeakySlope = T(0.01);

  static PositionalEncoder create(ParamStore<T>& ps, const std::string& name, PosVariant variant,
                                  std::int64_t embed_dim, std::mt19937_64& rng) {
    PositionalEncoder enc;
    enc.variant = variant;
    const std::int64_t widths[] = {pos_input_dim(variant), 32, 64, 128, 256, embed_dim};
    for (int i = 0; i < 5; ++i)
      enc.layers.push_back(Linear<T>::create(ps, name + ".linear" + std::to_string(i), widths[i],
                                             widths[i + 1], rng));
    return enc;
  }

  // geom: [n, 2|4] normalized geometry -> [n, embed] positional embeddings.
  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var geom) const {
    if (t.val(geom).dim(1) != pos_input_dim(variant))
      throw std::invalid_argument("positional encoder: input dim " +
                                  std::to_string(t.val(geom).dim(1)) + " does not match variant");
    Var x = geom;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](t, ps, x);
      if (i + 1 < layers.size()) x = ops::leaky_relu(t, x, kLeakySlope);
    }
    return x;
  }
};

// Elementwise sum of token features and positional embeddings.
template <typename T>
Var add_positional(Tape<T>& t, Var tokens, Var embeddings) {
  if (t.val(tokens).shape != t.val(embeddings).shape)
    throw std::invalid_argument("add_positional: shape mismatch");
  return ops::add(t, tokens, embeddings);
}

}  // namespace objcavit
