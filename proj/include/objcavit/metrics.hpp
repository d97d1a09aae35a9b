#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "objcavit/binning.hpp"
#include "objcavit/core/common.hpp"

namespace objcavit {

struct MetricSet {
  double abs_rel = 0, sq_rel = 0, rms = 0, rmsl = 0, log10 = 0;
  double delta1 = 0, delta2 = 0, delta3 = 0;

  std::vector<std::pair<std::string, double>> items() const {
    return {{"abs_rel", abs_rel}, {"sq_rel", sq_rel}, {"rms", rms},     {"rmsl", rmsl},
            {"log10", log10},     {"delta1", delta1}, {"delta2", delta2}, {"delta3", delta3}};
  }
};

// Streaming mean via ave_{n+1} = (ave_n * n + val_n) / (n + 1).
struct RunningAverage {
  double ave = 0.0;
  std::int64_t n = 0;

  void update(double val) {
    ave = (ave * static_cast<double>(n) + val) / static_cast<double>(n + 1);
    ++n;
  }
};

struct MetricAccumulator {
  RunningAverage abs_rel, sq_rel, rms, rmsl, log10, delta1, delta2, delta3;

  void update(const MetricSet& m) {
    abs_rel.update(m.abs_rel);
    sq_rel.update(m.sq_rel);
    rms.update(m.rms);
    rmsl.update(m.rmsl);
    log10.update(m.log10);
    delta1.update(m.delta1);
    delta2.update(m.delta2);
    delta3.update(m.delta3);
  }
  MetricSet means() const {
    return MetricSet{abs_rel.ave, sq_rel.ave, rms.ave, rmsl.ave,
                     log10.ave,   delta1.ave, delta2.ave, delta3.ave};
  }
  std::int64_t count() const { return abs_rel.n; }
};

// Eigen-style depth metrics over the shared valid mask. Thresholds are
// strict (< 1.25^n); sq_rel uses the squared difference.
template <typename T>
MetricSet compute_metrics(const DepthRaster<T>& pred, const DepthRaster<T>& gt) {
  if (pred.h != gt.h || pred.w != gt.w)
    throw std::invalid_argument("compute_metrics: raster dims differ");
  std::int64_t n = 0;
  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0, l10 = 0, d1 = 0, d2 = 0, d3 = 0;
  const double thr1 = 1.25, thr2 = 1.25 * 1.25, thr3 = 1.25 * 1.25 * 1.25;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.mask[i]) continue;
    const double d = static_cast<double>(pred.values[i]);
    const double ds = static_cast<double>(gt.values[i]);
    if (!(d > 0.0) || !(ds > 0.0))
      throw std::domain_error("compute_metrics: non-positive depth at valid pixel " +
                              std::to_string(i));
    const double diff = d - ds;
    abs_rel += std::abs(diff) / ds;
    sq_rel += diff * diff / ds;
    sq += diff * diff;
    const double dl = std::log(d) - std::log(ds);
    sq_log += dl * dl;
    l10 += std::abs(std::log10(d) - std::log10(ds));
    const double ratio = std::max(d / ds, ds / d);
    if (ratio < thr1) d1 += 1;
    if (ratio < thr2) d2 += 1;
    if (ratio < thr3) d3 += 1;
    ++n;
  }
  if (n == 0) throw empty_ground_truth_error("compute_metrics: no valid pixels");
  const double N = static_cast<double>(n);
  MetricSet m;
  m.abs_rel = abs_rel / N;
  m.sq_rel = sq_rel / N;
  m.rms = std::sqrt(sq / N);
  m.rmsl = std::sqrt(sq_log / N);
  m.log10 = l10 / N;
  m.delta1 = d1 / N;
  m.delta2 = d2 / N;
  m.delta3 = d3 / N;
  return m;
}

struct CropRect {
  std::int64_t x = 0, y = 0, w = 0, h = 0;
};

// Mask of pixels with gt in [d_min, d_max], optionally restricted to a
// rectangle (must lie within the image).
template <typename T>
std::vector<std::uint8_t> valid_mask(const DepthRaster<T>& gt, T d_min, T d_max,
                                     const CropRect* crop = nullptr) {
  if (crop) {
    if (crop->x < 0 || crop->y < 0 || crop->w < 0 || crop->h < 0 ||
        crop->x + crop->w > gt.w || crop->y + crop->h > gt.h)
      throw std::invalid_argument("valid_mask: crop rectangle out of bounds");
  }
  std::vector<std::uint8_t> mask(gt.values.size(), 0);
  for (std::int64_t y = 0; y < gt.h; ++y) {
    for (std::int64_t x = 0; x < gt.w; ++x) {
      if (crop && (x < crop->x || x >= crop->x + crop->w || y < crop->y || y >= crop->y + crop->h))
        continue;
      const T v = gt.at(y, x);
      if (v >= d_min && v <= d_max) mask[static_cast<std::size_t>(y * gt.w + x)] = 1;
    }
  }
  return mask;
}

}  // namespace objcavit
