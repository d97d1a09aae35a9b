#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "objcavit/core/common.hpp"

namespace objcavit {

// One detected object: WordNet-style synset label, its definition text, and
// a centre/size bounding box in pixels.
struct Detection {
  std::string label;       // e.g. "chair.n.01"
  std::string definition;  // dictionary definition, shipped with the data
  double cx = 0, cy = 0, w = 0, h = 0;
  double score = 1.0;

  double area() const { return w * h; }
};

struct DetectionSet {
  std::string image_id;
  std::int64_t width = 0, height = 0;
  std::vector<Detection> detections;
};

namespace detail {

inline double require_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw parse_error("detections: field " + path + " is not a number");
  return j.get<double>();
}

inline std::string require_string(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) throw parse_error("detections: field " + path + " is not a string");
  return j.get<std::string>();
}

}  // namespace detail

// Clamp a bbox into [0,w]x[0,h]; returns false if nothing remains.
inline bool clamp_bbox(Detection& d, std::int64_t img_w, std::int64_t img_h) {
  const double x0 = std::max(0.0, d.cx - d.w / 2);
  const double x1 = std::min(static_cast<double>(img_w), d.cx + d.w / 2);
  const double y0 = std::max(0.0, d.cy - d.h / 2);
  const double y1 = std::min(static_cast<double>(img_h), d.cy + d.h / 2);
  if (x1 <= x0 || y1 <= y0) return false;
  d.cx = (x0 + x1) / 2;
  d.cy = (y0 + y1) / 2;
  d.w = x1 - x0;
  d.h = y1 - y0;
  return true;
}

// Parse a split's detection document: a JSON array of per-image records.
// Out-of-bounds boxes are clamped with a warning; malformed records throw.
inline std::vector<DetectionSet> parse_detections(const std::string& path,
                                                  std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw parse_error("detections: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error("detections: " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw parse_error("detections: top-level document must be an array");

  std::vector<DetectionSet> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = "images[" + std::to_string(i) + "]";
    if (!rec.is_object()) throw parse_error("detections: " + where + " is not an object");
    DetectionSet set;
    if (!rec.contains("image_id") || !rec.contains("width") || !rec.contains("height"))
      throw parse_error("detections: " + where + " missing image_id/width/height");
    set.image_id = detail::require_string(rec["image_id"], where + ".image_id");
    set.width = static_cast<std::int64_t>(detail::require_number(rec["width"], where + ".width"));
    set.height =
        static_cast<std::int64_t>(detail::require_number(rec["height"], where + ".height"));
    if (set.width <= 0 || set.height <= 0)
      throw parse_error("detections: " + where + " has non-positive dims");
    if (rec.contains("detections")) {
      if (!rec["detections"].is_array())
        throw parse_error("detections: " + where + ".detections is not an array");
      for (std::size_t k = 0; k < rec["detections"].size(); ++k) {
        const auto& dj = rec["detections"][k];
        const std::string dwhere = where + ".detections[" + std::to_string(k) + "]";
        Detection d;
        if (!dj.contains("label") || !dj.contains("bbox_cxcywh"))
          throw parse_error("detections: " + dwhere + " missing label/bbox_cxcywh");
        d.label = detail::require_string(dj["label"], dwhere + ".label");
        d.definition = dj.contains("definition")
                           ? detail::require_string(dj["definition"], dwhere + ".definition")
                           : "";
        const auto& bb = dj["bbox_cxcywh"];
        if (!bb.is_array() || bb.size() != 4)
          throw parse_error("detections: " + dwhere + ".bbox_cxcywh must have 4 entries");
        d.cx = detail::require_number(bb[0], dwhere + ".bbox_cxcywh[0]");
        d.cy = detail::require_number(bb[1], dwhere + ".bbox_cxcywh[1]");
        d.w = detail::require_number(bb[2], dwhere + ".bbox_cxcywh[2]");
        d.h = detail::require_number(bb[3], dwhere + ".bbox_cxcywh[3]");
        if (dj.contains("score"))
          d.score = detail::require_number(dj["score"], dwhere + ".score");
        if (!(d.w > 0) || !(d.h > 0))
          throw parse_error("detections: " + dwhere + " has non-positive bbox dims");
        if (d.score < 0.0 || d.score > 1.0)
          throw parse_error("detections: " + dwhere + " score outside [0,1]");
        const bool inside = d.cx - d.w / 2 >= 0 && d.cx + d.w / 2 <= set.width &&
                            d.cy - d.h / 2 >= 0 && d.cy + d.h / 2 <= set.height;
        if (!inside) {
          if (!clamp_bbox(d, set.width, set.height))
            throw parse_error("detections: " + dwhere + " bbox lies entirely outside the image");
          if (warnings)
            warnings->push_back(dwhere + ": bbox clamped to image bounds");
        }
        set.detections.push_back(std::move(d));
      }
    }
    out.push_back(std::move(set));
  }
  return out;
}

inline nlohmann::json detections_to_json(const std::vector<DetectionSet>& sets) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& set : sets) {
    nlohmann::json rec;
    rec["image_id"] = set.image_id;
    rec["width"] = set.width;
    rec["height"] = set.height;
    rec["detections"] = nlohmann::json::array();
    for (const auto& d : set.detections) {
      rec["detections"].push_back({{"label", d.label},
                                   {"definition", d.definition},
                                   {"bbox_cxcywh", {d.cx, d.cy, d.w, d.h}},
                                   {"score", d.score}});
    }
    doc.push_back(std::move(rec));
  }
  return doc;
}

inline void write_detections(const std::string& path, const std::vector<DetectionSet>& sets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("detections: cannot write " + path);
  out << detections_to_json(sets).dump(2) << "\n";
}

// Mirror a detection set horizontally (image flipped about its vertical axis).
inline DetectionSet mirror_detections(const DetectionSet& set) {
  DetectionSet out = set;
  for (auto& d : out.detections) d.cx = static_cast<double>(set.width) - d.cx;
  return out;
}

}  // namespace objcavit
