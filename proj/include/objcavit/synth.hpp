#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "objcavit/binning.hpp"
#include "objcavit/core/common.hpp"
#include "objcavit/detections.hpp"
#include "objcavit/pfm.hpp"

namespace objcavit {

struct CatalogueEntry {
  std::string label;
  std::string definition;
  double true_w = 1.0, true_h = 1.0;  // physical size in meters
  float color[3] = {0.5f, 0.5f, 0.5f};
};

// Eight synthetic object classes with fixed fake definitions, so the
// language path is exercised end to end.
inline std::vector<CatalogueEntry> default_catalogue() {
  return {
      {"crate.n.01", "a rigid box used for storing or moving goods", 0.60, 0.60,
       {0.85f, 0.30f, 0.25f}},
      {"barrel.n.01", "a cylindrical container that holds liquids", 0.60, 0.90,
       {0.30f, 0.45f, 0.80f}},
      {"traffic_cone.n.01", "a cone-shaped marker placed on roads to divert traffic", 0.30, 0.50,
       {0.95f, 0.55f, 0.10f}},
      {"beach_ball.n.01", "a large inflated ball used for games", 0.40, 0.40,
       {0.20f, 0.75f, 0.35f}},
      {"cabinet.n.01", "a piece of furniture with shelves used for storage", 0.90, 1.40,
       {0.55f, 0.35f, 0.70f}},
      {"stool.n.01", "a simple seat without a back or arms", 0.40, 0.55,
       {0.75f, 0.70f, 0.20f}},
      {"lamp.n.01", "an artificial source of visible illumination on a stand", 0.35, 1.10,
       {0.25f, 0.80f, 0.80f}},
      {"plant_pot.n.01", "a container in which plants are cultivated", 0.30, 0.35,
       {0.60f, 0.60f, 0.60f}},
  };
}

// Recipe for a deterministic synthetic split. Placed objects follow the
// pinhole model: apparent side (px) = focal * true side / depth.
struct SceneSpec {
  std::uint64_t seed = 42;
  std::int64_t width = 80, height = 64;
  int min_objects = 2, max_objects = 5;
  std::vector<CatalogueEntry> catalogue = default_catalogue();
  double focal = 60.0;          // pixels
  double obj_depth_min = 2.0;   // meters
  double obj_depth_max = 8.0;
  // Background sits behind every object so detections are never occluded.
  double bg_depth_near = 8.5;   // bottom row
  double bg_depth_far = 9.5;    // top row
};

struct Scene {
  Tensor<float> image;  // [3,H,W] in [0,1]
  DepthRaster<float> depth;
  DetectionSet detections;
};

// Deterministic scene: a background with a vertical depth gradient plus k
// textured rectangles at sampled depths; a pixel's depth is the min over
// the covering objects and the background.
inline Scene generate_scene(const SceneSpec& spec, std::int64_t index) {
  if (spec.catalogue.empty()) throw std::invalid_argument("generate_scene: empty catalogue");
  if (spec.width < 8 || spec.height < 8)
    throw std::invalid_argument("generate_scene: image dims too small");
  std::mt19937_64 rng(combine_seed(spec.seed, static_cast<std::uint64_t>(index)));

  Scene scene;
  scene.image = Tensor<float>({3, spec.height, spec.width});
  scene.depth = DepthRaster<float>(spec.height, spec.width);
  scene.detections.image_id = "scene_" + [&] {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05lld", static_cast<long long>(index));
    return std::string(buf);
  }();
  scene.detections.width = spec.width;
  scene.detections.height = spec.height;

  // Background: flat shading with a top-to-bottom depth gradient.
  for (std::int64_t y = 0; y < spec.height; ++y) {
    const double fy = static_cast<double>(y) / static_cast<double>(spec.height - 1);
    const float bg_depth = static_cast<float>(spec.bg_depth_far +
                                              (spec.bg_depth_near - spec.bg_depth_far) * fy);
    const float shade = static_cast<float>(0.35 + 0.25 * fy);
    for (std::int64_t x = 0; x < spec.width; ++x) {
      scene.depth.at(y, x) = bg_depth;
      scene.image.at(0, y, x) = shade;
      scene.image.at(1, y, x) = shade;
      scene.image.at(2, y, x) = shade;
    }
  }

  std::uniform_int_distribution<int> count_dist(spec.min_objects, spec.max_objects);
  const int k = spec.min_objects >= spec.max_objects ? spec.min_objects : count_dist(rng);
  std::uniform_int_distribution<std::size_t> class_dist(0, spec.catalogue.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Placed {
    double cx, cy, w, h, depth;
    std::size_t cls;
    float jitter;
  };
  std::vector<Placed> placed;
  for (int i = 0; i < k; ++i) {
    const std::size_t cls = class_dist(rng);
    const auto& entry = spec.catalogue[cls];
    double depth = spec.obj_depth_min +
                   (spec.obj_depth_max - spec.obj_depth_min) * unit(rng);
    // Push too-close objects back until they fit the frame.
    double w = spec.focal * entry.true_w / depth;
    double h = spec.focal * entry.true_h / depth;
    while (w > 0.9 * static_cast<double>(spec.width) ||
           h > 0.9 * static_cast<double>(spec.height)) {
      depth *= 1.25;
      w = spec.focal * entry.true_w / depth;
      h = spec.focal * entry.true_h / depth;
    }
    const double cx = w / 2 + (static_cast<double>(spec.width) - w) * unit(rng);
    const double cy = h / 2 + (static_cast<double>(spec.height) - h) * unit(rng);
    const float jitter = static_cast<float>(0.85 + 0.3 * unit(rng));
    placed.push_back(Placed{cx, cy, w, h, depth, cls, jitter});
  }

  // Near objects are rasterized over far ones.
  std::vector<std::size_t> order(placed.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return placed[a].depth > placed[b].depth; });
  for (std::size_t oi : order) {
    const auto& p = placed[oi];
    const auto& entry = spec.catalogue[p.cls];
    const std::int64_t y0 = static_cast<std::int64_t>(std::ceil(p.cy - p.h / 2 - 0.5));
    const std::int64_t y1 = static_cast<std::int64_t>(std::floor(p.cy + p.h / 2 - 0.5));
    const std::int64_t x0 = static_cast<std::int64_t>(std::ceil(p.cx - p.w / 2 - 0.5));
    const std::int64_t x1 = static_cast<std::int64_t>(std::floor(p.cx + p.w / 2 - 0.5));
    for (std::int64_t y = std::max<std::int64_t>(0, y0);
         y <= std::min<std::int64_t>(spec.height - 1, y1); ++y) {
      for (std::int64_t x = std::max<std::int64_t>(0, x0);
           x <= std::min<std::int64_t>(spec.width - 1, x1); ++x) {
        if (static_cast<double>(p.depth) < static_cast<double>(scene.depth.at(y, x))) {
          scene.depth.at(y, x) = static_cast<float>(p.depth);
          const bool stripe = ((x - std::max<std::int64_t>(0, x0)) / 2 +
                               (y - std::max<std::int64_t>(0, y0)) / 2) % 2 == 0;
          const float mod = p.jitter * (stripe ? 1.0f : 0.8f);
          for (int c = 0; c < 3; ++c)
            scene.image.at(c, y, x) = std::min(1.0f, entry.color[c] * mod);
        }
      }
    }
  }

  for (const auto& p : placed) {
    Detection d;
    d.label = spec.catalogue[p.cls].label;
    d.definition = spec.catalogue[p.cls].definition;
    d.cx = p.cx;
    d.cy = p.cy;
    d.w = p.w;
    d.h = p.h;
    d.score = 1.0;
    scene.detections.detections.push_back(std::move(d));
  }
  return scene;
}

struct SplitManifest {
  std::vector<std::string> image_paths;
  std::vector<std::string> depth_paths;
  std::string detections_path;
  std::vector<std::uint32_t> image_crc, depth_crc;
};

inline std::uint32_t file_crc32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("crc32: cannot open " + path);
  std::uint32_t crc = 0;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    crc = crc32(buf, static_cast<std::size_t>(in.gcount()), crc);
  }
  return crc;
}

// Writes n scenes under out_dir (PFM rasters + one detection document) and
// a manifest listing every path with its checksum.
inline SplitManifest write_split(const SceneSpec& spec, std::int64_t n,
                                 const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "depths");

  SplitManifest manifest;
  std::vector<DetectionSet> all_detections;
  for (std::int64_t i = 0; i < n; ++i) {
    Scene scene = generate_scene(spec, i);
    const std::string img_path =
        (fs::path(out_dir) / "images" / (scene.detections.image_id + ".pfm")).string();
    const std::string depth_path =
        (fs::path(out_dir) / "depths" / (scene.detections.image_id + ".pfm")).string();
    write_pfm(img_path, image_tensor_to_pfm(scene.image));
    PfmImage dimg;
    dimg.channels = 1;
    dimg.width = scene.depth.w;
    dimg.height = scene.depth.h;
    dimg.data = scene.depth.values;
    write_pfm(depth_path, dimg);
    manifest.image_paths.push_back(img_path);
    manifest.depth_paths.push_back(depth_path);
    manifest.image_crc.push_back(file_crc32(img_path));
    manifest.depth_crc.push_back(file_crc32(depth_path));
    all_detections.push_back(std::move(scene.detections));
  }
  manifest.detections_path = (fs::path(out_dir) / "detections.json").string();
  write_detections(manifest.detections_path, all_detections);

  nlohmann::json j;
  j["count"] = n;
  j["seed"] = spec.seed;
  j["detections"] = manifest.detections_path;
  j["images"] = nlohmann::json::array();
  for (std::size_t i = 0; i < manifest.image_paths.size(); ++i) {
    char ic[16], dc[16];
    std::snprintf(ic, sizeof(ic), "%08x", manifest.image_crc[i]);
    std::snprintf(dc, sizeof(dc), "%08x", manifest.depth_crc[i]);
    j["images"].push_back({{"image", manifest.image_paths[i]},
                           {"depth", manifest.depth_paths[i]},
                           {"image_crc32", std::string(ic)},
                           {"depth_crc32", std::string(dc)}});
  }
  std::ofstream mo(fs::path(out_dir) / "manifest.json");
  if (!mo) throw std::runtime_error("write_split: cannot write manifest under " + out_dir);
  mo << j.dump(2) << "\n";
  return manifest;
}

}  // namespace objcavit
