#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "objcavit/core/tensor.hpp"

namespace objcavit {

// Handle to a node on a Tape.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Ops append value nodes together with a
// backward closure; backward() replays them in reverse. With grad_enabled
// false the closures are skipped, which makes repeated value-only forwards
// (finite differencing) cheap.
template <typename T>
class Tape {
public:
  using BackFn = std::function<void(Tape&)>;
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackFn back;
  };

  bool grad_enabled = true;
  std::vector<Node> nodes;

  Var leaf(Tensor<T> v) {
    nodes.push_back(Node{std::move(v), {}, nullptr});
    return Var{static_cast<std::int32_t>(nodes.size() - 1)};
  }

  Var make(Tensor<T> v, BackFn back) {
    nodes.push_back(Node{std::move(v), {}, grad_enabled ? std::move(back) : nullptr});
    return Var{static_cast<std::int32_t>(nodes.size() - 1)};
  }

  const Tensor<T>& val(Var x) const { return nodes[static_cast<std::size_t>(x.id)].value; }
  Tensor<T>& val(Var x) { return nodes[static_cast<std::size_t>(x.id)].value; }
  Tensor<T>& grad(Var x) { return nodes[static_cast<std::size_t>(x.id)].grad; }

  void backward(Var loss) {
    if (!grad_enabled) throw std::logic_error("tape: backward on a grad-disabled tape");
    if (val(loss).numel() != 1) throw std::invalid_argument("tape: backward needs a scalar loss");
    for (auto& n : nodes) n.grad = Tensor<T>::zeros(n.value.shape);
    grad(loss)[0] = T(1);
    for (std::size_t i = nodes.size(); i-- > 0;)
      if (nodes[i].back) nodes[i].back(*this);
  }
};

namespace ops {

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.shape != bv.shape) throw std::invalid_argument("add: shape mismatch");
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] + bv[i];
  return t.make(std::move(out), [a, b, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    auto& gb = tp.grad(b);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.shape != bv.shape) throw std::invalid_argument("sub: shape mismatch");
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] - bv[i];
  return t.make(std::move(out), [a, b, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    auto& gb = tp.grad(b);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.shape != bv.shape) throw std::invalid_argument("mul: shape mismatch");
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] * bv[i];
  return t.make(std::move(out), [a, b, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& av2 = tp.val(a);
    const auto& bv2 = tp.val(b);
    auto& ga = tp.grad(a);
    auto& gb = tp.grad(b);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av2[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T k) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = k * av[i];
  return t.make(std::move(out), [a, k, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += k * g[i];
  });
}

template <typename T>
Var add_scalar(Tape<T>& t, Var a, T c) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] + c;
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

// Y[n,dout] = X[n,din] * W[dout,din]^T + b[dout]
template <typename T>
Var linear(Tape<T>& t, Var x, Var w, Var b) {
  const auto& xv = t.val(x);
  const auto& wv = t.val(w);
  const auto& bv = t.val(b);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
    throw std::invalid_argument("linear: shape mismatch x" + shape_str(xv.shape) + " w" +
                                shape_str(wv.shape));
  const std::int64_t n = xv.dim(0), din = xv.dim(1), dout = wv.dim(0);
  if (bv.numel() != dout) throw std::invalid_argument("linear: bias size mismatch");
  Tensor<T> out({n, dout});
  gemm_bt(xv.ptr(), n, din, wv.ptr(), dout, out.ptr());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < dout; ++j) out.at(i, j) += bv[j];
  return t.make(std::move(out), [x, w, b, n, din, dout, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);  // [n,dout]
    const auto& xv2 = tp.val(x);
    const auto& wv2 = tp.val(w);
    gemm(g.ptr(), n, dout, wv2.ptr(), din, tp.grad(x).ptr(), true);      // dX += g*W
    gemm_at(g.ptr(), n, dout, xv2.ptr(), din, tp.grad(w).ptr(), true);   // dW += g^T*X
    auto& gb = tp.grad(b);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < dout; ++j) gb[j] += g.at(i, j);
  });
}

// C[m,n] = A[m,k] * B[k,n]
template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(av.shape) + " x " +
                                shape_str(bv.shape));
  const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor<T> out({m, n});
  gemm(av.ptr(), m, k, bv.ptr(), n, out.ptr());
  return t.make(std::move(out), [a, b, m, k, n, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    gemm_bt(g.ptr(), m, n, tp.val(b).ptr(), k, tp.grad(a).ptr(), true);  // dA += g*B^T
    gemm_at(tp.val(a).ptr(), m, k, g.ptr(), n, tp.grad(b).ptr(), true);  // dB += A^T*g
  });
}

// C[m,n] = A[m,k] * B[n,k]^T  (attention scores)
template <typename T>
Var matmul_bt(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    throw std::invalid_argument("matmul_bt: shape mismatch");
  const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
  Tensor<T> out({m, n});
  gemm_bt(av.ptr(), m, k, bv.ptr(), n, out.ptr());
  return t.make(std::move(out), [a, b, m, k, n, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);                                        // [m,n]
    gemm(g.ptr(), m, n, tp.val(b).ptr(), k, tp.grad(a).ptr(), true);      // dA += g*B
    gemm_at(g.ptr(), m, n, tp.val(a).ptr(), k, tp.grad(b).ptr(), true);   // dB += g^T*A
  });
}

template <typename T>
Var relu(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& av2 = tp.val(a);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i)
      if (av2[i] > T(0)) ga[i] += g[i];
  });
}

template <typename T>
Var leaky_relu(Tape<T>& t, Var a, T slope) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] > T(0) ? av[i] : slope * av[i];
  return t.make(std::move(out), [a, slope, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& av2 = tp.val(a);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += (av2[i] > T(0) ? T(1) : slope) * g[i];
  });
}

template <typename T>
Var gelu(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  const T inv_sqrt2 = T(0.7071067811865475244);
  for (std::int64_t i = 0; i < av.numel(); ++i)
    out[i] = T(0.5) * av[i] * (T(1) + std::erf(av[i] * inv_sqrt2));
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& av2 = tp.val(a);
    auto& ga = tp.grad(a);
    const T inv_sqrt2b = T(0.7071067811865475244);
    const T inv_sqrt2pi = T(0.3989422804014326779);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const T x = av2[i];
      const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2b));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      ga[i] += (cdf + x * pdf) * g[i];
    }
  });
}

// Row-wise softmax over the last dim of a 2-d tensor.
template <typename T>
Var softmax_rows(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  if (av.rank() != 2) throw std::invalid_argument("softmax_rows: expects 2-d input");
  const std::int64_t n = av.dim(0), d = av.dim(1);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < n; ++i) {
    T mx = av.at(i, 0);
    for (std::int64_t j = 1; j < d; ++j) mx = std::max(mx, av.at(i, j));
    T sum = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      out.at(i, j) = std::exp(av.at(i, j) - mx);
      sum += out.at(i, j);
    }
    for (std::int64_t j = 0; j < d; ++j) out.at(i, j) /= sum;
  }
  return t.make(std::move(out), [a, n, d, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& y = tp.val(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < n; ++i) {
      T dot = T(0);
      for (std::int64_t j = 0; j < d; ++j) dot += g.at(i, j) * y.at(i, j);
      for (std::int64_t j = 0; j < d; ++j) ga.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
    }
  });
}

// Row-wise layer norm with affine params gamma[d], beta[d].
template <typename T>
Var layer_norm_rows(Tape<T>& t, Var a, Var gamma, Var beta, T eps = T(1e-5)) {
  const auto& av = t.val(a);
  if (av.rank() != 2) throw std::invalid_argument("layer_norm_rows: expects 2-d input");
  const std::int64_t n = av.dim(0), d = av.dim(1);
  Tensor<T> out(av.shape);
  Tensor<T> xhat(av.shape);
  std::vector<T> inv_std(static_cast<std::size_t>(n));
  const auto& gv = t.val(gamma);
  const auto& bv = t.val(beta);
  for (std::int64_t i = 0; i < n; ++i) {
    T mu = T(0);
    for (std::int64_t j = 0; j < d; ++j) mu += av.at(i, j);
    mu /= T(d);
    T var = T(0);
    for (std::int64_t j = 0; j < d; ++j) {
      const T c = av.at(i, j) - mu;
      var += c * c;
    }
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = is;
    for (std::int64_t j = 0; j < d; ++j) {
      xhat.at(i, j) = (av.at(i, j) - mu) * is;
      out.at(i, j) = gv[j] * xhat.at(i, j) + bv[j];
    }
  }
  return t.make(std::move(out), [a, gamma, beta, n, d, xh = std::move(xhat),
                                 istd = std::move(inv_std), out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& gv2 = tp.val(gamma);
    auto& ga = tp.grad(a);
    auto& gg = tp.grad(gamma);
    auto& gb = tp.grad(beta);
    for (std::int64_t i = 0; i < n; ++i) {
      T mean_gy = T(0), mean_gyx = T(0);
      for (std::int64_t j = 0; j < d; ++j) {
        const T gy = g.at(i, j) * gv2[j];
        mean_gy += gy;
        mean_gyx += gy * xh.at(i, j);
        gg[j] += g.at(i, j) * xh.at(i, j);
        gb[j] += g.at(i, j);
      }
      mean_gy /= T(d);
      mean_gyx /= T(d);
      const T is = istd[static_cast<std::size_t>(i)];
      for (std::int64_t j = 0; j < d; ++j) {
        const T gy = g.at(i, j) * gv2[j];
        ga.at(i, j) += (gy - mean_gy - xh.at(i, j) * mean_gyx) * is;
      }
    }
  });
}

template <typename T>
Var sum_all(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  T s = T(0);
  for (std::int64_t i = 0; i < av.numel(); ++i) s += av[i];
  return t.make(Tensor<T>::scalar(s), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const T g = tp.grad(self)[0];
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

template <typename T>
Var mean_all(Tape<T>& t, Var a) {
  return scale(t, sum_all(t, a), T(1) / T(t.val(a).numel()));
}

template <typename T>
Var log_elem(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = std::log(av[i]);
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& av2 = tp.val(a);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / av2[i];
  });
}

template <typename T>
Var sqrt_elem(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = std::sqrt(av[i]);
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& y = tp.val(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / (T(2) * y[i]);
  });
}

// y_i = a_i / s where s is a scalar var.
template <typename T>
Var div_by_scalar(Tape<T>& t, Var a, Var s) {
  const auto& av = t.val(a);
  const T sv = t.val(s)[0];
  Tensor<T> out(av.shape);
  for (std::int64_t i = 0; i < av.numel(); ++i) out[i] = av[i] / sv;
  return t.make(std::move(out), [a, s, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    const auto& y = tp.val(self);
    const T sv2 = tp.val(s)[0];
    auto& ga = tp.grad(a);
    T gs = T(0);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      ga[i] += g[i] / sv2;
      gs -= g[i] * y[i] / sv2;
    }
    tp.grad(s)[0] += gs;
  });
}

template <typename T>
Var reshape(Tape<T>& t, Var a, Shape s) {
  Tensor<T> out = t.val(a).reshaped(std::move(s));
  return t.make(std::move(out), [a, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var transpose2d(Tape<T>& t, Var a) {
  const auto& av = t.val(a);
  if (av.rank() != 2) throw std::invalid_argument("transpose2d: expects 2-d input");
  const std::int64_t n = av.dim(0), d = av.dim(1);
  Tensor<T> out({d, n});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < d; ++j) out.at(j, i) = av.at(i, j);
  return t.make(std::move(out), [a, n, d, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) ga.at(i, j) += g.at(j, i);
  });
}

template <typename T>
Var slice_rows(Tape<T>& t, Var a, std::int64_t r0, std::int64_t r1) {
  const auto& av = t.val(a);
  if (av.rank() != 2 || r0 < 0 || r1 > av.dim(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  const std::int64_t d = av.dim(1);
  Tensor<T> out({r1 - r0, d});
  std::copy(av.ptr() + r0 * d, av.ptr() + r1 * d, out.ptr());
  return t.make(std::move(out), [a, r0, r1, d, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < (r1 - r0) * d; ++i) ga[r0 * d + i] += g[i];
  });
}

template <typename T>
Var slice_cols(Tape<T>& t, Var a, std::int64_t c0, std::int64_t c1) {
  const auto& av = t.val(a);
  if (av.rank() != 2 || c0 < 0 || c1 > av.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  const std::int64_t n = av.dim(0), d = av.dim(1), w = c1 - c0;
  Tensor<T> out({n, w});
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < w; ++j) out.at(i, j) = av.at(i, c0 + j);
  return t.make(std::move(out), [a, c0, n, d, w, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
    (void)d;
  });
}

template <typename T>
Var concat_cols(Tape<T>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const std::int64_t n = t.val(parts[0]).dim(0);
  std::int64_t d = 0;
  for (Var p : parts) {
    if (t.val(p).rank() != 2 || t.val(p).dim(0) != n)
      throw std::invalid_argument("concat_cols: row mismatch");
    d += t.val(p).dim(1);
  }
  Tensor<T> out({n, d});
  std::int64_t off = 0;
  for (Var p : parts) {
    const auto& pv = t.val(p);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < pv.dim(1); ++j) out.at(i, off + j) = pv.at(i, j);
    off += pv.dim(1);
  }
  return t.make(std::move(out), [parts, n, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    std::int64_t off2 = 0;
    for (Var p : parts) {
      auto& gp = tp.grad(p);
      const std::int64_t w = gp.dim(1);
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < w; ++j) gp.at(i, j) += g.at(i, off2 + j);
      off2 += w;
    }
  });
}

template <typename T>
Var concat_rows(Tape<T>& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const std::int64_t d = t.val(parts[0]).dim(1);
  std::int64_t n = 0;
  for (Var p : parts) {
    if (t.val(p).rank() != 2 || t.val(p).dim(1) != d)
      throw std::invalid_argument("concat_rows: col mismatch");
    n += t.val(p).dim(0);
  }
  Tensor<T> out({n, d});
  std::int64_t off = 0;
  for (Var p : parts) {
    const auto& pv = t.val(p);
    std::copy(pv.ptr(), pv.ptr() + pv.numel(), out.ptr() + off);
    off += pv.numel();
  }
  return t.make(std::move(out), [parts, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    std::int64_t off2 = 0;
    for (Var p : parts) {
      auto& gp = tp.grad(p);
      for (std::int64_t i = 0; i < gp.numel(); ++i) gp[i] += g[off2 + i];
      off2 += gp.numel();
    }
  });
}

// y_k = a.flat[idx_k]
template <typename T>
Var gather_flat(Tape<T>& t, Var a, std::vector<std::int64_t> idx) {
  const auto& av = t.val(a);
  Tensor<T> out({static_cast<std::int64_t>(idx.size())});
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<std::int64_t>(k)] = av[idx[k]];
  return t.make(std::move(out), [a, ix = std::move(idx), out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    for (std::size_t k = 0; k < ix.size(); ++k) ga[ix[k]] += g[static_cast<std::int64_t>(k)];
  });
}

}  // namespace ops
}  // namespace objcavit
