#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "objcavit/binning.hpp"
#include "objcavit/config.hpp"
#include "objcavit/core/conv_ops.hpp"
#include "objcavit/core/tape.hpp"
#include "objcavit/detections.hpp"
#include "objcavit/embeddings.hpp"
#include "objcavit/nn.hpp"
#include "objcavit/phrases.hpp"
#include "objcavit/positional.hpp"

namespace objcavit {

template <typename T>
struct Conv {
  std::size_t w = 0, b = 0;
  std::int64_t stride = 1, pad = 0;

  static Conv create(ParamStore<T>& ps, const std::string& name, std::int64_t cin,
                     std::int64_t cout, std::int64_t k, std::int64_t stride, std::int64_t pad,
                     std::mt19937_64& rng) {
    Conv c;
    c.stride = stride;
    c.pad = pad;
    c.w = ps.add(name + ".weight", uniform_init<T>({cout, cin, k, k}, cin * k * k, rng));
    c.b = ps.add(name + ".bias", uniform_init<T>({cout}, cin * k * k, rng));
    return c;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var x) const {
    return ops::conv2d(t, x, ps.var(w), ps.var(b), stride, pad);
  }
};

// Per-token normalized geometry (cx, cy, w, h) in image units.
struct TokenGeometry {
  double cx = 0, cy = 0, w = 0, h = 0;
};

// The full network: toy convolutional encoder-decoder backbone, stride-p
// patch embedding, object/patch self-attention, image-object
// cross-attention, and the adaptive-bin output head.
template <typename T>
class ObjCAViTModel {
public:
  explicit ObjCAViTModel(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.embed_dim % 8 != 0)
      throw std::invalid_argument("model: embed_dim must be divisible by 8");
    if (cfg.embed_dim % cfg.heads != 0)
      throw std::invalid_argument("model: embed_dim must be divisible by heads");
    std::mt19937_64 rng(cfg.seed);
    const std::int64_t d = cfg.embed_dim;
    const std::int64_t w0 = d / 8, w1 = d / 4, w2 = d / 2, w3 = d;

    stem_ = Conv<T>::create(ps_, "backbone.stem", 3, w0, 3, 2, 1, rng);
    enc1_ = Conv<T>::create(ps_, "backbone.enc1", w0, w1, 3, 2, 1, rng);
    enc2_ = Conv<T>::create(ps_, "backbone.enc2", w1, w2, 3, 2, 1, rng);
    enc3_ = Conv<T>::create(ps_, "backbone.enc3", w2, w3, 3, 2, 1, rng);
    dec1_ = Conv<T>::create(ps_, "backbone.dec1", w3 + w2, w2, 3, 1, 1, rng);
    dec2_ = Conv<T>::create(ps_, "backbone.dec2", w2 + w1, w1, 3, 1, 1, rng);
    dec3_ = Conv<T>::create(ps_, "backbone.dec3", w1 + w0, w0, 3, 1, 1, rng);
    out_conv_ = Conv<T>::create(ps_, "backbone.out", w0, d, 1, 1, 0, rng);

    patchify_ = Conv<T>::create(ps_, "patchify", d, d, cfg.patch_size, cfg.patch_size, 0, rng);
    object_proj_ = Linear<T>::create(ps_, "object_proj", kTextEmbedDim, d, rng);
    null_token_ = ps_.add("null_object_token", uniform_init<T>({1, d}, d, rng));
    pos_encoder_ = PositionalEncoder<T>::create(ps_, "pos_encoder", cfg.pos_variant, d, rng);
    object_sa_ = TransformerStack<T>::create(ps_, "object_sa", cfg.layers, d, cfg.heads,
                                             cfg.ff_dim, rng);
    patch_sa_ = TransformerStack<T>::create(ps_, "patch_sa", cfg.layers, d, cfg.heads, cfg.ff_dim,
                                            rng);
    cross_ = CrossAttentionBlock<T>::create(ps_, "cross_attention", d, cfg.heads, cfg.ff_dim, rng);
    head_fc1_ = Linear<T>::create(ps_, "head.fc1", d, cfg.head_hidden, rng);
    head_fc2_ = Linear<T>::create(ps_, "head.fc2", cfg.head_hidden, cfg.n_bins, rng);
    prob_proj_ = Linear<T>::create(ps_, "prob_proj", cfg.n_kernel_tokens, cfg.n_bins, rng,
                                   /*zero_bias=*/true);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return ps_; }
  const ParamStore<T>& params() const { return ps_; }

  // Toy encoder-decoder emitting embed_dim channels at half resolution.
  Var backbone_forward(Tape<T>& t, Var image) const {
    const auto& img = t.val(image);
    if (img.rank() != 3 || img.dim(0) != 3)
      throw std::invalid_argument("backbone: expects a [3,H,W] image");
    const std::int64_t h = img.dim(1), w = img.dim(2);
    if (h % 2 != 0 || w % 2 != 0 || h < 64 || w < 64)
      throw std::invalid_argument("backbone: dims must be even and >= 64, got " +
                                  std::to_string(h) + "x" + std::to_string(w));
    Var s0 = ops::gelu(t, stem_(t, ps_, image));   // H/2
    Var s1 = ops::gelu(t, enc1_(t, ps_, s0));      // H/4
    Var s2 = ops::gelu(t, enc2_(t, ps_, s1));      // H/8
    Var s3 = ops::gelu(t, enc3_(t, ps_, s2));      // H/16
    Var u1 = ops::nearest_resize(t, s3, t.val(s2).dim(1), t.val(s2).dim(2));
    Var d1 = ops::gelu(t, dec1_(t, ps_, ops::concat_channels(t, u1, s2)));
    Var u2 = ops::nearest_resize(t, d1, t.val(s1).dim(1), t.val(s1).dim(2));
    Var d2 = ops::gelu(t, dec2_(t, ps_, ops::concat_channels(t, u2, s1)));
    Var u3 = ops::nearest_resize(t, d2, t.val(s0).dim(1), t.val(s0).dim(2));
    Var d3 = ops::gelu(t, dec3_(t, ps_, ops::concat_channels(t, u3, s0)));
    return out_conv_(t, ps_, d3);
  }

  // Non-overlapping patch embedding; returns [n_patch, embed] tokens in
  // row-major patch order plus their input-image-normalized geometry.
  Var patchify(Tape<T>& t, Var dense, std::vector<TokenGeometry>* geometry = nullptr) const {
    const auto& dv = t.val(dense);
    const std::int64_t h2 = dv.dim(1), w2 = dv.dim(2), p = cfg_.patch_size;
    if (h2 % p != 0 || w2 % p != 0)
      throw std::invalid_argument("patchify: dense dims " + std::to_string(h2) + "x" +
                                  std::to_string(w2) + " not divisible by patch size " +
                                  std::to_string(p));
    Var emb = patchify_(t, ps_, dense);  // [embed, h2/p, w2/p]
    const std::int64_t gh = h2 / p, gw = w2 / p;
    Var tokens = ops::transpose2d(t, ops::reshape(t, emb, {cfg_.embed_dim, gh * gw}));
    if (geometry) {
      geometry->clear();
      const double ih = static_cast<double>(2 * h2), iw = static_cast<double>(2 * w2);
      for (std::int64_t r = 0; r < gh; ++r)
        for (std::int64_t c = 0; c < gw; ++c)
          geometry->push_back(TokenGeometry{(2.0 * static_cast<double>(c * p) + p) / iw,
                                            (2.0 * static_cast<double>(r * p) + p) / ih,
                                            2.0 * p / iw, 2.0 * p / ih});
    }
    return tokens;
  }

  Var encode_positions(Tape<T>& t, const std::vector<TokenGeometry>& geom) const {
    const int in_dim = pos_input_dim(cfg_.pos_variant);
    Tensor<T> g({static_cast<std::int64_t>(geom.size()), in_dim});
    for (std::size_t i = 0; i < geom.size(); ++i) {
      g.at(static_cast<std::int64_t>(i), 0) = static_cast<T>(geom[i].cx);
      g.at(static_cast<std::int64_t>(i), 1) = static_cast<T>(geom[i].cy);
      if (in_dim == 4) {
        g.at(static_cast<std::int64_t>(i), 2) = static_cast<T>(geom[i].w);
        g.at(static_cast<std::int64_t>(i), 3) = static_cast<T>(geom[i].h);
      }
    }
    return pos_encoder_(t, ps_, t.leaf(std::move(g)));
  }

  // Object tokens from pre-computed 512-d embeddings and geometry. An empty
  // detection set yields the learned null token (no positional term).
  Var object_tokens(Tape<T>& t, const Tensor<T>& embeds,
                    const std::vector<TokenGeometry>& geom) const {
    if (embeds.numel() == 0) return ps_.var(null_token_);
    if (embeds.rank() != 2 || embeds.dim(1) != kTextEmbedDim)
      throw std::invalid_argument("object_tokens: embeddings must be [n,512]");
    if (static_cast<std::size_t>(embeds.dim(0)) != geom.size())
      throw std::invalid_argument("object_tokens: geometry count mismatch");
    Var feats = object_proj_(t, ps_, t.leaf(embeds));
    return add_positional(t, feats, encode_positions(t, geom));
  }

  struct Forward {
    Var widths;      // [n_bins]
    Var centres;     // [n_bins]
    Var probs;       // [P, n_bins]
    Var depth_half;  // [H/2, W/2]
    Var depth;       // [H, W]
    std::int64_t h2 = 0, w2 = 0;
  };

  // Full forward pass. Params must already be bound to the tape.
  Forward forward(Tape<T>& t, const Tensor<T>& image, const Tensor<T>& object_embeds,
                  const std::vector<TokenGeometry>& object_geom) const {
    const std::int64_t h = image.dim(1), w = image.dim(2);
    Var dense = backbone_forward(t, t.leaf(image));
    const std::int64_t h2 = t.val(dense).dim(1), w2 = t.val(dense).dim(2);

    std::vector<TokenGeometry> patch_geom;
    Var patches = patchify(t, dense, &patch_geom);
    patches = add_positional(t, patches, encode_positions(t, patch_geom));
    patches = patch_sa_(t, ps_, patches);

    Var objects = object_tokens(t, object_embeds, object_geom);
    if (cfg_.object_sa) objects = object_sa_(t, ps_, objects);
    // With object SA disabled the tokens are forwarded to cross-attention
    // unchanged.
    Var seq = cross_(t, ps_, patches, objects);

    Forward f;
    f.h2 = h2;
    f.w2 = w2;
    const std::int64_t n_v = t.val(seq).dim(0);
    if (n_v < cfg_.n_kernel_tokens + 1)
      throw std::invalid_argument(
          "output head: configuration error, sequence length " + std::to_string(n_v) +
          " < 1 + n_kernel_tokens (" + std::to_string(cfg_.n_kernel_tokens) +
          "); use a smaller patch size or fewer kernel tokens");
    Var token0 = ops::slice_rows(t, seq, 0, 1);
    Var raw_w = head_fc2_(t, ps_, ops::gelu(t, head_fc1_(t, ps_, token0)));
    f.widths = ops::normalize_widths_op(t, ops::reshape(t, raw_w, {cfg_.n_bins}));
    f.centres = ops::bin_centres_op(t, f.widths, static_cast<T>(cfg_.d_min),
                                    static_cast<T>(cfg_.d_max));

    Var kernels = ops::slice_rows(t, seq, 1, 1 + cfg_.n_kernel_tokens);
    Var dense_pixels =
        ops::transpose2d(t, ops::reshape(t, dense, {cfg_.embed_dim, h2 * w2}));
    Var responses = ops::matmul_bt(t, dense_pixels, kernels);  // [P, n_kernel]
    f.probs = ops::softmax_rows(t, prob_proj_(t, ps_, responses));

    Var depth_col = ops::matmul(t, f.probs, ops::reshape(t, f.centres, {cfg_.n_bins, 1}));
    f.depth_half = ops::reshape(t, depth_col, {h2, w2});
    f.depth = ops::bilinear_resize2d(t, f.depth_half, h, w);
    return f;
  }

  // Exposed for wiring tests.
  const TransformerStack<T>& object_sa_stack() const { return object_sa_; }
  const Linear<T>& object_projection() const { return object_proj_; }
  const PositionalEncoder<T>& positional_encoder() const { return pos_encoder_; }

private:
  ModelConfig cfg_;
  ParamStore<T> ps_;
  Conv<T> stem_, enc1_, enc2_, enc3_, dec1_, dec2_, dec3_, out_conv_, patchify_;
  Linear<T> object_proj_;
  std::size_t null_token_ = 0;
  PositionalEncoder<T> pos_encoder_;
  TransformerStack<T> object_sa_, patch_sa_;
  CrossAttentionBlock<T> cross_;
  Linear<T> head_fc1_, head_fc2_, prob_proj_;
};

// Normalized (cx, cy, w, h) geometry for each detection.
inline std::vector<TokenGeometry> detection_geometry(const DetectionSet& set) {
  std::vector<TokenGeometry> geom;
  geom.reserve(set.detections.size());
  const double w = static_cast<double>(set.width), h = static_cast<double>(set.height);
  for (const auto& d : set.detections)
    geom.push_back(TokenGeometry{d.cx / w, d.cy / h, d.w / w, d.h / h});
  return geom;
}

// Phrase + embedding stage: one 512-d vector per detection under the
// configured language mode.
template <typename T>
Tensor<T> embed_detections(const ModelConfig& cfg, const EmbeddingProvider& provider,
                           const DetectionSet& set, std::uint64_t epoch = 0) {
  const std::int64_t n = static_cast<std::int64_t>(set.detections.size());
  Tensor<T> out({n, static_cast<std::int64_t>(kTextEmbedDim)});
  for (std::int64_t i = 0; i < n; ++i) {
    if (cfg.language_mode == LanguageMode::kCtrlZeros) continue;  // stays zero
    const std::string phrase =
        build_phrase(cfg.language_mode, set, static_cast<std::size_t>(i), cfg.seed, epoch);
    const auto vec = provider.embed(phrase);
    for (int k = 0; k < kTextEmbedDim; ++k) out.at(i, k) = static_cast<T>(vec[static_cast<std::size_t>(k)]);
  }
  return out;
}

// One-call forward from raw inputs to plain outputs (no gradients).
template <typename T>
struct ModelPrediction {
  BinWidths<T> widths;
  BinCentres<T> centres;
  BinProbabilities<T> probs;
  DepthRaster<T> depth;
};

template <typename T>
ModelPrediction<T> model_forward(ObjCAViTModel<T>& model, const EmbeddingProvider& provider,
                                 const Tensor<T>& image, const DetectionSet& detections,
                                 std::uint64_t epoch = 0) {
  Tape<T> tape;
  tape.grad_enabled = false;
  model.params().bind(tape);
  Tensor<T> embeds = embed_detections<T>(model.config(), provider, detections, epoch);
  auto geom = detection_geometry(detections);
  auto f = model.forward(tape, image, embeds, geom);

  ModelPrediction<T> out;
  out.widths.widths.assign(tape.val(f.widths).data.begin(), tape.val(f.widths).data.end());
  out.centres.centres.assign(tape.val(f.centres).data.begin(), tape.val(f.centres).data.end());
  out.centres.d_min = static_cast<T>(model.config().d_min);
  out.centres.d_max = static_cast<T>(model.config().d_max);
  const auto& pv = tape.val(f.probs);
  out.probs.h = f.h2;
  out.probs.w = f.w2;
  out.probs.n_bins = model.config().n_bins;
  out.probs.probs = pv.data;
  const auto& dv = tape.val(f.depth);
  out.depth = DepthRaster<T>(dv.dim(0), dv.dim(1));
  out.depth.values = dv.data;
  return out;
}

}  // namespace objcavit
