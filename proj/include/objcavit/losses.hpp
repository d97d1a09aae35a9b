#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "objcavit/binning.hpp"
#include "objcavit/core/common.hpp"
#include "objcavit/core/tape.hpp"

namespace objcavit {

enum class SilogVariant {
  kAsPrinted,     // 10*sqrt(mean(g^2) + 0.15/N^2 * (sum g)^2)
  kVarianceForm,  // 10*sqrt(mean(g^2) - 0.85/N^2 * (sum g)^2)
};

template <typename T>
struct LossBreakdown {
  T silog = T(0);
  T bin_density = T(0);
  T total = T(0);
  std::int64_t valid_pixel_count = 0;
};

namespace detail {
template <typename T>
inline T silog_coeff(SilogVariant v) {
  return v == SilogVariant::kAsPrinted ? T(0.15) : T(-0.85);
}
}  // namespace detail

// Scale-invariant log loss over the shared valid mask.
template <typename T>
T silog_loss(const DepthRaster<T>& pred, const DepthRaster<T>& gt,
             SilogVariant variant = SilogVariant::kAsPrinted) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("silog_loss: raster dims differ");
  if (pred.mask != gt.mask) throw std::invalid_argument("silog_loss: masks differ");
  std::int64_t n = 0;
  T sum_g = T(0), sum_g2 = T(0);
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!gt.mask[i]) continue;
    if (!(pred.values[i] > T(0)) || !(gt.values[i] > T(0)))
      throw std::domain_error("silog_loss: non-positive depth at valid pixel " +
                              std::to_string(i));
    const T g = std::log(pred.values[i]) - std::log(gt.values[i]);
    sum_g += g;
    sum_g2 += g * g;
    ++n;
  }
  if (n == 0) throw empty_ground_truth_error("silog_loss: no valid pixels");
  const T N = static_cast<T>(n);
  const T inner = sum_g2 / N + detail::silog_coeff<T>(variant) * (sum_g * sum_g) / (N * N);
  return T(10) * std::sqrt(inner);
}

// Mean over a of the squared distance to the nearest element of b.
// Ties resolve to the lower index.
template <typename T>
T chamfer_1d(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_1d: empty set");
  T sum = T(0);
  for (const T x : a) {
    T best = (x - b[0]) * (x - b[0]);
    for (std::size_t j = 1; j < b.size(); ++j) {
      const T d = (x - b[j]) * (x - b[j]);
      if (d < best) best = d;
    }
    sum += best;
  }
  return sum / static_cast<T>(a.size());
}

// Bidirectional chamfer between valid ground-truth depths and bin centres.
template <typename T>
T bin_density_loss(const DepthRaster<T>& gt, const BinCentres<T>& centres) {
  std::vector<T> depths;
  depths.reserve(gt.values.size());
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (gt.mask[i]) depths.push_back(gt.values[i]);
  if (depths.empty()) throw empty_ground_truth_error("bin_density_loss: no valid pixels");
  return chamfer_1d(depths, centres.centres) + chamfer_1d(centres.centres, depths);
}

template <typename T>
LossBreakdown<T> total_loss(const DepthRaster<T>& pred, const DepthRaster<T>& gt,
                            const BinCentres<T>& centres, T beta,
                            SilogVariant variant = SilogVariant::kAsPrinted) {
  LossBreakdown<T> out;
  out.silog = silog_loss(pred, gt, variant);
  out.bin_density = bin_density_loss(gt, centres);
  out.total = out.silog + beta * out.bin_density;
  out.valid_pixel_count = gt.valid_count();
  return out;
}

namespace ops {

// SILog on the tape: pred_valid and gt_valid are flat [N] vectors of the
// masked pixels (gathered upstream). gt may be a constant leaf.
template <typename T>
Var silog_loss_op(Tape<T>& t, Var pred_valid, Var gt_valid, SilogVariant variant) {
  const std::int64_t n = t.val(pred_valid).numel();
  if (n == 0) throw empty_ground_truth_error("silog_loss: no valid pixels");
  if (t.val(gt_valid).numel() != n) throw std::invalid_argument("silog_loss: size mismatch");
  Var g = sub(t, log_elem(t, pred_valid), log_elem(t, gt_valid));
  Var mean_sq = scale(t, sum_all(t, mul(t, g, g)), T(1) / T(n));
  Var sum_g = sum_all(t, g);
  Var sq_sum = mul(t, sum_g, sum_g);
  Var inner = add(t, mean_sq,
                  scale(t, sq_sum, detail::silog_coeff<T>(variant) / (T(n) * T(n))));
  return scale(t, sqrt_elem(t, inner), T(10));
}

// Directed chamfer term on the tape; gradients flow to both sets.
template <typename T>
Var chamfer_dir_op(Tape<T>& t, Var a, Var b) {
  const auto& av = t.val(a);
  const auto& bv = t.val(b);
  const std::int64_t na = av.numel(), nb = bv.numel();
  if (na == 0 || nb == 0) throw std::invalid_argument("chamfer_1d: empty set");
  std::vector<std::int64_t> arg(static_cast<std::size_t>(na));
  T sum = T(0);
  for (std::int64_t i = 0; i < na; ++i) {
    std::int64_t best_j = 0;
    T best = (av[i] - bv[0]) * (av[i] - bv[0]);
    for (std::int64_t j = 1; j < nb; ++j) {
      const T d = (av[i] - bv[j]) * (av[i] - bv[j]);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    arg[static_cast<std::size_t>(i)] = best_j;
    sum += best;
  }
  return t.make(Tensor<T>::scalar(sum / T(na)),
                [a, b, na, am = std::move(arg), out_id = t.nodes.size()](Tape<T>& tp) {
                  Var self{static_cast<std::int32_t>(out_id)};
                  const T g = tp.grad(self)[0];
                  const auto& av2 = tp.val(a);
                  const auto& bv2 = tp.val(b);
                  auto& ga = tp.grad(a);
                  auto& gb = tp.grad(b);
                  for (std::int64_t i = 0; i < na; ++i) {
                    const std::int64_t j = am[static_cast<std::size_t>(i)];
                    const T d = T(2) * (av2[i] - bv2[j]) * g / T(na);
                    ga[i] += d;
                    gb[j] -= d;
                  }
                });
}

template <typename T>
Var bin_density_loss_op(Tape<T>& t, Var gt_valid, Var centres) {
  return add(t, chamfer_dir_op(t, gt_valid, centres), chamfer_dir_op(t, centres, gt_valid));
}

}  // namespace ops
}  // namespace objcavit
