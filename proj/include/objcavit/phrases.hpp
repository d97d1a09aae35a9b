#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "objcavit/core/common.hpp"
#include "objcavit/detections.hpp"

namespace objcavit {

// 7-point area-comparison scale, ordered small to big.
inline const std::array<std::string, 7>& size_scale() {
  static const std::array<std::string, 7> scale = {
      "much smaller than", "smaller than",      "a bit smaller than", "about the same size as",
      "a bit bigger than", "bigger than",       "much bigger than"};
  return scale;
}

// "chair.n.01" -> "chair"; "stop_sign.n.01" -> "stop sign".
inline std::string synset_lemma(const std::string& label) {
  std::string head = label.substr(0, label.find('.'));
  std::replace(head.begin(), head.end(), '_', ' ');
  return head;
}

// Index into size_scale() for the area factor f_A = area_i / area_j.
// Edges at f_A <= e^-3 and f_A > e^3; interior bins round ln f_A to the
// nearest centre in {-2,...,2}.
inline int size_ratio_index(double area_i, double area_j) {
  if (!(area_i > 0.0) || !(area_j > 0.0))
    throw std::invalid_argument("size_ratio_phrase: areas must be positive");
  const double lf = std::log(area_i / area_j);
  if (lf <= -3.0) return 0;
  if (lf > 3.0) return 6;
  const double k = std::clamp(std::round(lf), -2.0, 2.0);
  return static_cast<int>(k) + 3;
}

inline std::string size_ratio_phrase(double area_i, double area_j) {
  return size_scale()[static_cast<std::size_t>(size_ratio_index(area_i, area_j))];
}

// "This is a/an {lemma}, defined as {definition}."
inline std::string build_phrase_def(const Detection& d) {
  if (d.definition.empty())
    throw std::invalid_argument("build_phrase_def: missing definition for " + d.label);
  return "This is a/an " + synset_lemma(d.label) + ", defined as " + d.definition + ".";
}

// Seed for the partner draw of one object. Keyed by the object's own
// attributes (not its list index) so detection order does not matter.
inline std::uint64_t object_phrase_seed(std::uint64_t run_seed, const std::string& image_id,
                                        std::uint64_t epoch, const Detection& d) {
  std::uint64_t h = fnv1a64(image_id, combine_seed(run_seed, epoch));
  h = fnv1a64(d.label, h);
  const double geo[4] = {d.cx, d.cy, d.w, d.h};
  h = fnv1a64(geo, sizeof(geo), h);
  return mix64(h);
}

namespace detail {
inline std::uint64_t object_sort_key(const Detection& d) {
  std::uint64_t h = fnv1a64(d.label);
  const double geo[4] = {d.cx, d.cy, d.w, d.h};
  return fnv1a64(geo, sizeof(geo), h);
}
}  // namespace detail

// Def + relative-size phrase: the partner j is drawn uniformly among the
// other detections with a per-object seed; singletons fall back to def-only.
inline std::string build_phrase_def_sz(const DetectionSet& set, std::size_t i,
                                       std::uint64_t run_seed, std::uint64_t epoch) {
  const Detection& di = set.detections.at(i);
  std::string base = build_phrase_def(di);
  if (set.detections.size() < 2) return base;

  // Candidate partners in a canonical, order-independent arrangement.
  std::vector<std::size_t> others;
  others.reserve(set.detections.size() - 1);
  for (std::size_t j = 0; j < set.detections.size(); ++j)
    if (j != i) others.push_back(j);
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
    return detail::object_sort_key(set.detections[a]) < detail::object_sort_key(set.detections[b]);
  });

  std::mt19937_64 rng(object_phrase_seed(run_seed, set.image_id, epoch, di));
  std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
  const Detection& dj = set.detections[others[pick(rng)]];

  base += " This " + synset_lemma(di.label) + " appears to be " +
          size_ratio_phrase(di.area(), dj.area()) + " the " + synset_lemma(dj.label) + ".";
  return base;
}

enum class LanguageMode { kDefOnly, kDefSzRel, kCtrlZeros };

// Phrase for one object under the configured language mode. kCtrlZeros
// produces no text; the provider substitutes zero embeddings.
inline std::string build_phrase(LanguageMode mode, const DetectionSet& set, std::size_t i,
                                std::uint64_t run_seed, std::uint64_t epoch) {
  switch (mode) {
    case LanguageMode::kDefOnly:
      return build_phrase_def(set.detections.at(i));
    case LanguageMode::kDefSzRel:
      return build_phrase_def_sz(set, i, run_seed, epoch);
    case LanguageMode::kCtrlZeros:
      return "";
  }
  throw std::logic_error("build_phrase: unknown mode");
}

}  // namespace objcavit
