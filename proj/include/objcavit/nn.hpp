#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "objcavit/core/tape.hpp"
#include "objcavit/core/tensor.hpp"

namespace objcavit {

// Named parameter registry. Parameters live here between steps; bind()
// re-leafs them onto a fresh tape before each forward.
template <typename T>
class ParamStore {
public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Var var;
  };

  std::size_t add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw std::logic_error("param registered twice: " + name);
    index_[name] = entries_.size();
    entries_.push_back(Entry{std::move(name), std::move(value), Var{}});
    return entries_.size() - 1;
  }

  void bind(Tape<T>& t) {
    for (auto& e : entries_) e.var = t.leaf(e.value);
  }

  Var var(std::size_t id) const { return entries_[id].var; }
  Tensor<T>& value(std::size_t id) { return entries_[id].value; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init.
template <typename T>
Tensor<T> uniform_init(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
struct Linear {
  std::size_t w = 0, b = 0;
  std::int64_t in = 0, out = 0;

  static Linear create(ParamStore<T>& ps, const std::string& name, std::int64_t in,
                       std::int64_t out, std::mt19937_64& rng, bool zero_bias = false) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = ps.add(name + ".weight", uniform_init<T>({out, in}, in, rng));
    l.b = ps.add(name + ".bias",
                 zero_bias ? Tensor<T>::zeros({out}) : uniform_init<T>({out}, in, rng));
    return l;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var x) const {
    return ops::linear(t, x, ps.var(w), ps.var(b));
  }
};

template <typename T>
struct LayerNorm {
  std::size_t gamma = 0, beta = 0;

  static LayerNorm create(ParamStore<T>& ps, const std::string& name, std::int64_t dim) {
    LayerNorm ln;
    ln.gamma = ps.add(name + ".gamma", Tensor<T>::full({dim}, T(1)));
    ln.beta = ps.add(name + ".beta", Tensor<T>::zeros({dim}));
    return ln;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var x) const {
    return ops::layer_norm_rows(t, x, ps.var(gamma), ps.var(beta));
  }
};

// Multi-head scaled dot-product attention over already-projected q/k/v,
// scale 1/sqrt(d/heads). Heads are contiguous column blocks.
template <typename T>
Var multi_head_attention(Tape<T>& t, Var q, Var k, Var v, int heads) {
  const std::int64_t d = t.val(q).dim(1);
  if (d % heads != 0) throw std::invalid_argument("attention: embed dim not divisible by heads");
  const std::int64_t dh = d / heads;
  const T scale_factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  std::vector<Var> ctx;
  ctx.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = ops::slice_cols(t, q, h * dh, (h + 1) * dh);
    Var kh = ops::slice_cols(t, k, h * dh, (h + 1) * dh);
    Var vh = ops::slice_cols(t, v, h * dh, (h + 1) * dh);
    Var scores = ops::scale(t, ops::matmul_bt(t, qh, kh), scale_factor);
    Var attn = ops::softmax_rows(t, scores);
    ctx.push_back(ops::matmul(t, attn, vh));
  }
  return heads == 1 ? ctx[0] : ops::concat_cols(t, ctx);
}

// Pre-norm transformer encoder layer:
//   h = x + Wo * MHA(LN1(x));  y = h + FF(LN2(h)), FF = W2 * gelu(W1 * .)
template <typename T>
struct TransformerLayer {
  LayerNorm<T> ln1, ln2;
  Linear<T> wq, wk, wv, wo, ff1, ff2;
  int heads = 1;

  static TransformerLayer create(ParamStore<T>& ps, const std::string& name, std::int64_t dim,
                                 int heads, std::int64_t ff_dim, std::mt19937_64& rng) {
    TransformerLayer l;
    l.heads = heads;
    l.ln1 = LayerNorm<T>::create(ps, name + ".ln1", dim);
    l.wq = Linear<T>::create(ps, name + ".wq", dim, dim, rng);
    l.wk = Linear<T>::create(ps, name + ".wk", dim, dim, rng);
    l.wv = Linear<T>::create(ps, name + ".wv", dim, dim, rng);
    l.wo = Linear<T>::create(ps, name + ".wo", dim, dim, rng);
    l.ln2 = LayerNorm<T>::create(ps, name + ".ln2", dim);
    l.ff1 = Linear<T>::create(ps, name + ".ff1", dim, ff_dim, rng);
    l.ff2 = Linear<T>::create(ps, name + ".ff2", ff_dim, dim, rng);
    return l;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var x) const {
    Var n1 = ln1(t, ps, x);
    Var attn = multi_head_attention(t, wq(t, ps, n1), wk(t, ps, n1), wv(t, ps, n1), heads);
    Var h = ops::add(t, x, wo(t, ps, attn));
    Var n2 = ln2(t, ps, h);
    Var ff = ff2(t, ps, ops::gelu(t, ff1(t, ps, n2)));
    return ops::add(t, h, ff);
  }
};

template <typename T>
struct TransformerStack {
  std::vector<TransformerLayer<T>> layers;

  static TransformerStack create(ParamStore<T>& ps, const std::string& name, int n_layers,
                                 std::int64_t dim, int heads, std::int64_t ff_dim,
                                 std::mt19937_64& rng) {
    TransformerStack s;
    for (int i = 0; i < n_layers; ++i)
      s.layers.push_back(TransformerLayer<T>::create(ps, name + ".layer" + std::to_string(i), dim,
                                                     heads, ff_dim, rng));
    return s;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var x) const {
    for (const auto& l : layers) x = l(t, ps, x);
    return x;
  }
};

// Pre-norm cross-attention block: queries from the visual stream, keys and
// values from the object stream, residual on the visual stream, then FF.
template <typename T>
struct CrossAttentionBlock {
  LayerNorm<T> ln_q, ln_kv, ln2;
  Linear<T> wq, wk, wv, wo, ff1, ff2;
  int heads = 1;

  static CrossAttentionBlock create(ParamStore<T>& ps, const std::string& name, std::int64_t dim,
                                    int heads, std::int64_t ff_dim, std::mt19937_64& rng) {
    CrossAttentionBlock c;
    c.heads = heads;
    c.ln_q = LayerNorm<T>::create(ps, name + ".ln_q", dim);
    c.ln_kv = LayerNorm<T>::create(ps, name + ".ln_kv", dim);
    c.wq = Linear<T>::create(ps, name + ".wq", dim, dim, rng);
    c.wk = Linear<T>::create(ps, name + ".wk", dim, dim, rng);
    c.wv = Linear<T>::create(ps, name + ".wv", dim, dim, rng);
    c.wo = Linear<T>::create(ps, name + ".wo", dim, dim, rng);
    c.ln2 = LayerNorm<T>::create(ps, name + ".ln2", dim);
    c.ff1 = Linear<T>::create(ps, name + ".ff1", dim, ff_dim, rng);
    c.ff2 = Linear<T>::create(ps, name + ".ff2", ff_dim, dim, rng);
    return c;
  }

  Var operator()(Tape<T>& t, const ParamStore<T>& ps, Var visual, Var objects) const {
    Var nq = ln_q(t, ps, visual);
    Var nkv = ln_kv(t, ps, objects);
    Var attn =
        multi_head_attention(t, wq(t, ps, nq), wk(t, ps, nkv), wv(t, ps, nkv), heads);
    Var h = ops::add(t, visual, wo(t, ps, attn));
    Var ff = ff2(t, ps, ops::gelu(t, ff1(t, ps, ln2(t, ps, h))));
    return ops::add(t, h, ff);
  }
};

}  // namespace objcavit
