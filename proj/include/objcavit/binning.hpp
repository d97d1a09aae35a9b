#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "objcavit/core/conv_ops.hpp"
#include "objcavit/core/tape.hpp"
#include "objcavit/core/tensor.hpp"

namespace objcavit {

// H x W depth raster in meters plus a validity mask.
template <typename T>
struct DepthRaster {
  std::int64_t h = 0, w = 0;
  std::vector<T> values;
  std::vector<std::uint8_t> mask;

  DepthRaster() = default;
  DepthRaster(std::int64_t h_, std::int64_t w_)
      : h(h_), w(w_), values(static_cast<std::size_t>(h_ * w_), T(0)),
        mask(static_cast<std::size_t>(h_ * w_), 1) {}

  T& at(std::int64_t y, std::int64_t x) { return values[static_cast<std::size_t>(y * w + x)]; }
  const T& at(std::int64_t y, std::int64_t x) const {
    return values[static_cast<std::size_t>(y * w + x)];
  }
  bool valid(std::int64_t y, std::int64_t x) const {
    return mask[static_cast<std::size_t>(y * w + x)] != 0;
  }
  std::int64_t valid_count() const {
    std::int64_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
  }
};

// Normalized depth-bin widths: non-negative, summing to one.
template <typename T>
struct BinWidths {
  std::vector<T> widths;
};

// Bin centres in meters for a [d_min, d_max] range.
template <typename T>
struct BinCentres {
  std::vector<T> centres;
  T d_min = T(0), d_max = T(0);
};

// Per-pixel bin probability raster at half resolution: (h x w x n_bins).
template <typename T>
struct BinProbabilities {
  std::int64_t h = 0, w = 0, n_bins = 0;
  std::vector<T> probs;  // row-major (y, x, bin)

  const T* pixel(std::int64_t y, std::int64_t x) const {
    return probs.data() + static_cast<std::size_t>((y * w + x) * n_bins);
  }
};

inline constexpr double kWidthEps = 1e-3;

// Clamped-shift normalization of raw head outputs onto the width simplex:
// w_i = (max(r_i,0)+eps) / sum_j (max(r_j,0)+eps).
template <typename T>
BinWidths<T> normalize_widths(const std::vector<T>& raw) {
  if (raw.empty()) throw std::invalid_argument("normalize_widths: empty input");
  const T eps = static_cast<T>(kWidthEps);
  BinWidths<T> out;
  out.widths.resize(raw.size());
  T sum = T(0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.widths[i] = (raw[i] > T(0) ? raw[i] : T(0)) + eps;
    sum += out.widths[i];
  }
  for (auto& w : out.widths) w /= sum;
  return out;
}

// c_i = d_min + (d_max - d_min) * (w_i/2 + sum_{j<i} w_j)
template <typename T>
BinCentres<T> bin_centres(const BinWidths<T>& widths, T d_min, T d_max) {
  if (!(d_min < d_max)) throw std::invalid_argument("bin_centres: requires d_min < d_max");
  if (widths.widths.empty()) throw std::invalid_argument("bin_centres: empty widths");
  BinCentres<T> out;
  out.d_min = d_min;
  out.d_max = d_max;
  out.centres.resize(widths.widths.size());
  const T range = d_max - d_min;
  T prefix = T(0);
  for (std::size_t i = 0; i < widths.widths.size(); ++i) {
    out.centres[i] = d_min + range * (widths.widths[i] / T(2) + prefix);
    prefix += widths.widths[i];
  }
  return out;
}

// Per-pixel expected depth: d = dot(P, c). Output raster is at the
// probability raster's (half) resolution, fully valid.
template <typename T>
DepthRaster<T> expected_depth(const BinProbabilities<T>& probs, const BinCentres<T>& centres) {
  if (probs.n_bins != static_cast<std::int64_t>(centres.centres.size()))
    throw std::invalid_argument("expected_depth: probs last dim " + std::to_string(probs.n_bins) +
                                " != centres " + std::to_string(centres.centres.size()));
  DepthRaster<T> out(probs.h, probs.w);
  for (std::int64_t y = 0; y < probs.h; ++y) {
    for (std::int64_t x = 0; x < probs.w; ++x) {
      const T* p = probs.pixel(y, x);
      T d = T(0);
      for (std::int64_t k = 0; k < probs.n_bins; ++k) d += p[k] * centres.centres[static_cast<std::size_t>(k)];
      out.at(y, x) = d;
    }
  }
  return out;
}

// Bilinear upsample with half-pixel centres; mask is resampled by nearest
// neighbour. Exact passthrough when dims match.
template <typename T>
DepthRaster<T> upsample_bilinear(const DepthRaster<T>& src, std::int64_t target_h,
                                 std::int64_t target_w) {
  if (src.h < 1 || src.w < 1) throw std::invalid_argument("upsample_bilinear: empty source");
  if (target_h < 1 || target_w < 1)
    throw std::invalid_argument("upsample_bilinear: zero target dims");
  DepthRaster<T> out(target_h, target_w);
  if (target_h == src.h && target_w == src.w) {
    out.values = src.values;
    out.mask = src.mask;
    return out;
  }
  auto taps = ops::bilinear_taps(src.h, src.w, target_h, target_w);
  for (std::int64_t p = 0; p < target_h * target_w; ++p) {
    const auto& tp = taps[static_cast<std::size_t>(p)];
    const T wy = static_cast<T>(tp.wy), wx = static_cast<T>(tp.wx);
    out.values[static_cast<std::size_t>(p)] =
        (T(1) - wy) * ((T(1) - wx) * src.at(tp.y0, tp.x0) + wx * src.at(tp.y0, tp.x1)) +
        wy * ((T(1) - wx) * src.at(tp.y1, tp.x0) + wx * src.at(tp.y1, tp.x1));
  }
  for (std::int64_t i = 0; i < target_h; ++i) {
    const std::int64_t sy = std::min<std::int64_t>(
        src.h - 1, static_cast<std::int64_t>((static_cast<double>(i) + 0.5) * src.h / target_h));
    for (std::int64_t j = 0; j < target_w; ++j) {
      const std::int64_t sx = std::min<std::int64_t>(
          src.w - 1, static_cast<std::int64_t>((static_cast<double>(j) + 0.5) * src.w / target_w));
      out.mask[static_cast<std::size_t>(i * target_w + j)] = src.valid(sy, sx) ? 1 : 0;
    }
  }
  return out;
}

template <typename T>
void validate(const BinWidths<T>& w, double tol = 1e-6) {
  T sum = T(0);
  for (auto v : w.widths) {
    if (v < T(0)) throw std::invalid_argument("BinWidths: negative entry");
    sum += v;
  }
  if (std::abs(static_cast<double>(sum) - 1.0) > tol)
    throw std::invalid_argument("BinWidths: sum " + std::to_string(static_cast<double>(sum)) +
                                " not 1 within tolerance");
}

namespace ops {

// Tape counterpart of normalize_widths for a [n] raw vector.
template <typename T>
Var normalize_widths_op(Tape<T>& t, Var raw) {
  if (t.val(raw).numel() == 0) throw std::invalid_argument("normalize_widths: empty input");
  Var shifted = add_scalar(t, relu(t, raw), static_cast<T>(kWidthEps));
  Var total = sum_all(t, shifted);
  return div_by_scalar(t, shifted, total);
}

// Tape counterpart of bin_centres for a [n] widths vector.
template <typename T>
Var bin_centres_op(Tape<T>& t, Var widths, T d_min, T d_max) {
  if (!(d_min < d_max)) throw std::invalid_argument("bin_centres: requires d_min < d_max");
  const auto& wv = t.val(widths);
  const std::int64_t n = wv.numel();
  Tensor<T> out({n});
  const T range = d_max - d_min;
  T prefix = T(0);
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = d_min + range * (wv[i] / T(2) + prefix);
    prefix += wv[i];
  }
  return t.make(std::move(out), [widths, n, range, out_id = t.nodes.size()](Tape<T>& tp) {
    Var self{static_cast<std::int32_t>(out_id)};
    const auto& g = tp.grad(self);
    auto& gw = tp.grad(widths);
    // dc_i/dw_j = range * (1/2 if j==i, 1 if j<i) -> suffix sums.
    T suffix = T(0);
    for (std::int64_t j = n - 1; j >= 0; --j) {
      gw[j] += range * (g[j] / T(2) + suffix);
      suffix += g[j];
    }
  });
}

}  // namespace ops
}  // namespace objcavit
