#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "objcavit/core/tape.hpp"
#include "objcavit/core/tensor.hpp"

namespace objcavit::ops {

// im2col for a CHW image: col[p, (ci*kh+ky)*kw+kx], p = oy*ow+ox.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, std::int64_t kh, std::int64_t kw, std::int64_t stride,
                 std::int64_t pad, std::int64_t oh, std::int64_t ow) {
  const std::int64_t ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> col({oh * ow, ci * kh * kw});
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      T* row = col.ptr() + (oy * ow + ox) * ci * kh * kw;
      for (std::int64_t c = 0; c < ci; ++c) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          const std::int64_t iy = oy * stride - pad + ky;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const std::int64_t ix = ox * stride - pad + kx;
            row[(c * kh + ky) * kw + kx] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? x.at(c, iy, ix) : T(0);
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(const Tensor<T>& col, std::int64_t ci, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                std::int64_t oh, std::int64_t ow, Tensor<T>& x_grad) {
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const T* row = col.ptr() + (oy * ow + ox) * ci * kh * kw;
      for (std::int64_t c = 0; c < ci; ++c) {
        for (std::int64_t ky = 0; ky < kh; ++ky) {
          const std::int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t kx = 0; kx < kw; ++kx) {
            const std::int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            x_grad.at(c, iy, ix) += row[(c * kh + ky) * kw + kx];
          }
        }
      }
    }
  }
}

// 2-d convolution on a CHW image. w: [cout, cin, kh, kw], b: [cout].
template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, std::int64_t stride, std::int64_t pad) {
  const auto& xv = t.val(x);
  const auto& wv = t.val(w);
  if (xv.rank() != 3 || wv.rank() != 4 || xv.dim(0) != wv.dim(1))
    throw std::invalid_argument("conv2d: shape mismatch x" + shape_str(xv.shape) + " w" +
                                shape_str(wv.shape));
  const std::int64_t ci = xv.dim(0), h = xv.dim(1), ww = xv.dim(2);
  const std::int64_t co = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t ow = (ww + 2 * pad - kw) / stride + 1;
  if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d: output would be empty");
  Tensor<T> col = im2col(xv, kh, kw, stride, pad, oh, ow);
  Tensor<T> out({co, oh, ow});
  // out[co, p] = W2[co, K] * col[p, K]^T
  gemm_bt(wv.ptr(), co, ci * kh * kw, col.ptr(), oh * ow, out.ptr());
  const auto& bv = t.val(b);
  for (std::int64_t c = 0; c < co; ++c) {
    T* plane = out.ptr() + c * oh * ow;
    for (std::int64_t p = 0; p < oh * ow; ++p) plane[p] += bv[c];
  }
  return t.make(std::move(out), [x, w, b, ci, h, ww, co, kh, kw, stride, pad, oh, ow,
                                 cl = std::move(col), out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);  // [co, oh, ow] == [co, P]
    const std::int64_t P = oh * ow, K = ci * kh * kw;
    // dW[co,K] += g[co,P] * col[P,K]
    gemm(g.ptr(), co, P, cl.ptr(), K, tp.grad(w).ptr(), true);
    // db
    auto& gb = tp.grad(b);
    for (std::int64_t c = 0; c < co; ++c) {
      const T* plane = g.ptr() + c * P;
      T s = T(0);
      for (std::int64_t p = 0; p < P; ++p) s += plane[p];
      gb[c] += s;
    }
    // dcol[P,K] = g^T[P,co] * W2[co,K]
    Tensor<T> dcol({P, K});
    gemm_at(g.ptr(), co, P, tp.val(w).ptr(), K, dcol.ptr());
    col2im_add(dcol, ci, h, ww, kh, kw, stride, pad, oh, ow, tp.grad(x));
  });
}

// Nearest-neighbour resize of a CHW raster to (oh, ow).
template <typename T>
Var nearest_resize(Tape<T>& t, Var x, std::int64_t oh, std::int64_t ow) {
  const auto& xv = t.val(x);
  if (xv.rank() != 3) throw std::invalid_argument("nearest_resize: expects CHW");
  const std::int64_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  std::vector<std::int64_t> ys(static_cast<std::size_t>(oh)), xs(static_cast<std::size_t>(ow));
  for (std::int64_t i = 0; i < oh; ++i)
    ys[static_cast<std::size_t>(i)] = std::min<std::int64_t>(
        h - 1, static_cast<std::int64_t>((static_cast<double>(i) + 0.5) * h / oh));
  for (std::int64_t j = 0; j < ow; ++j)
    xs[static_cast<std::size_t>(j)] = std::min<std::int64_t>(
        w - 1, static_cast<std::int64_t>((static_cast<double>(j) + 0.5) * w / ow));
  Tensor<T> out({c, oh, ow});
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < oh; ++i)
      for (std::int64_t j = 0; j < ow; ++j)
        out.at(ch, i, j) = xv.at(ch, ys[static_cast<std::size_t>(i)],
                                 xs[static_cast<std::size_t>(j)]);
  return t.make(std::move(out), [x, c, oh, ow, ys2 = std::move(ys), xs2 = std::move(xs),
                                 out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& gx = tp.grad(x);
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j)
          gx.at(ch, ys2[static_cast<std::size_t>(i)], xs2[static_cast<std::size_t>(j)]) +=
              g.at(ch, i, j);
  });
}

template <typename T>
Var concat_channels(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
    throw std::invalid_argument("concat_channels: spatial mismatch");
  const std::int64_t ca = av.dim(0), cb = bv.dim(0), h = av.dim(1), w = av.dim(2);
  Tensor<T> out({ca + cb, h, w});
  std::copy(av.ptr(), av.ptr() + av.numel(), out.ptr());
  std::copy(bv.ptr(), bv.ptr() + bv.numel(), out.ptr() + av.numel());
  return t.make(std::move(out), [a, b, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& ga = tp.grad(a);
    auto& gb = tp.grad(b);
    for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += g[i];
    for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] += g[ga.numel() + i];
  });
}

struct BilinearTap {
  std::int64_t y0, y1, x0, x1;
  double wy, wx;
};

// Half-pixel-centre sample positions for a (h,w) -> (oh,ow) bilinear resize.
inline std::vector<BilinearTap> bilinear_taps(std::int64_t h, std::int64_t w, std::int64_t oh,
                                              std::int64_t ow) {
  std::vector<BilinearTap> taps(static_cast<std::size_t>(oh * ow));
  for (std::int64_t i = 0; i < oh; ++i) {
    double sy = (static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(oh) -
                0.5;
    double fy = std::floor(sy);
    double wy = sy - fy;
    std::int64_t y0 = static_cast<std::int64_t>(fy);
    std::int64_t y1 = y0 + 1;
    if (y0 < 0) { y0 = 0; y1 = 0; wy = 0.0; }
    if (y1 > h - 1) { y1 = h - 1; if (y0 > h - 1) { y0 = h - 1; wy = 0.0; } }
    for (std::int64_t j = 0; j < ow; ++j) {
      double sx = (static_cast<double>(j) + 0.5) * static_cast<double>(w) /
                      static_cast<double>(ow) - 0.5;
      double fx = std::floor(sx);
      double wx = sx - fx;
      std::int64_t x0 = static_cast<std::int64_t>(fx);
      std::int64_t x1 = x0 + 1;
      if (x0 < 0) { x0 = 0; x1 = 0; wx = 0.0; }
      if (x1 > w - 1) { x1 = w - 1; if (x0 > w - 1) { x0 = w - 1; wx = 0.0; } }
      taps[static_cast<std::size_t>(i * ow + j)] = BilinearTap{y0, y1, x0, x1, wy, wx};
    }
  }
  return taps;
}

// Bilinear resize of an (h,w) raster to (oh,ow); half-pixel centres.
template <typename T>
Var bilinear_resize2d(Tape<T>& t, Var x, std::int64_t oh, std::int64_t ow) {
  const auto& xv = t.val(x);
  if (xv.rank() != 2) throw std::invalid_argument("bilinear_resize2d: expects 2-d raster");
  if (oh < 1 || ow < 1) throw std::invalid_argument("bilinear_resize2d: zero target dims");
  const std::int64_t h = xv.dim(0), w = xv.dim(1);
  auto taps = bilinear_taps(h, w, oh, ow);
  Tensor<T> out({oh, ow});
  for (std::int64_t p = 0; p < oh * ow; ++p) {
    const auto& tp0 = taps[static_cast<std::size_t>(p)];
    const T wy = static_cast<T>(tp0.wy), wx = static_cast<T>(tp0.wx);
    out[p] = (T(1) - wy) * ((T(1) - wx) * xv.at(tp0.y0, tp0.x0) + wx * xv.at(tp0.y0, tp0.x1)) +
             wy * ((T(1) - wx) * xv.at(tp0.y1, tp0.x0) + wx * xv.at(tp0.y1, tp0.x1));
  }
  return t.make(std::move(out), [x, oh, ow, tps = std::move(taps),
                                 out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& gx = tp.grad(x);
    for (std::int64_t p = 0; p < oh * ow; ++p) {
      const auto& tap = tps[static_cast<std::size_t>(p)];
      const T wy = static_cast<T>(tap.wy), wx = static_cast<T>(tap.wx);
      const T gv = g[p];
      gx.at(tap.y0, tap.x0) += (T(1) - wy) * (T(1) - wx) * gv;
      gx.at(tap.y0, tap.x1) += (T(1) - wy) * wx * gv;
      gx.at(tap.y1, tap.x0) += wy * (T(1) - wx) * gv;
      gx.at(tap.y1, tap.x1) += wy * wx * gv;
    }
  });
}

}  // namespace objcavit::ops
