#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "objcavit/core/common.hpp"
#include "objcavit/core/tensor.hpp"

namespace objcavit {

// Portable float map. "PF" = 3-channel, "Pf" = 1-channel; negative scale
// marks little-endian data; rows are stored bottom-up per the format.
struct PfmImage {
  std::int64_t width = 0, height = 0;
  int channels = 1;
  std::vector<float> data;  // row-major top-down, interleaved channels

  float& at(std::int64_t y, std::int64_t x, int c = 0) {
    return data[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  const float& at(std::int64_t y, std::int64_t x, int c = 0) const {
    return data[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

static_assert(std::endian::native == std::endian::little,
              "pfm: big-endian hosts would need byte swapping");

inline void write_pfm(const std::string& path, const PfmImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pfm: cannot write " + path);
  out << (img.channels == 3 ? "PF" : "Pf") << "\n"
      << img.width << " " << img.height << "\n"
      << "-1.0\n";
  for (std::int64_t y = img.height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(&img.at(y, 0, 0)),
              static_cast<std::streamsize>(img.width * img.channels * sizeof(float)));
  if (!out) throw std::runtime_error("pfm: write failed for " + path);
}

inline PfmImage read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("pfm: cannot open " + path);
  std::string magic;
  in >> magic;
  PfmImage img;
  if (magic == "PF")
    img.channels = 3;
  else if (magic == "Pf")
    img.channels = 1;
  else
    throw parse_error("pfm: bad magic \"" + magic + "\" in " + path);
  double scale = 0.0;
  in >> img.width >> img.height >> scale;
  if (!in || img.width <= 0 || img.height <= 0)
    throw parse_error("pfm: bad header in " + path);
  if (scale > 0) throw parse_error("pfm: big-endian data unsupported in " + path);
  in.get();  // single whitespace after the scale line
  img.data.resize(static_cast<std::size_t>(img.width * img.height * img.channels));
  for (std::int64_t y = img.height - 1; y >= 0; --y)
    in.read(reinterpret_cast<char*>(&img.at(y, 0, 0)),
            static_cast<std::streamsize>(img.width * img.channels * sizeof(float)));
  if (!in) throw parse_error("pfm: truncated data in " + path);
  return img;
}

template <typename T>
Tensor<T> pfm_to_image_tensor(const PfmImage& img) {
  if (img.channels != 3) throw std::invalid_argument("pfm: expected a 3-channel image");
  Tensor<T> t({3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x)
        t.at(c, y, x) = static_cast<T>(img.at(y, x, c));
  return t;
}

template <typename T>
PfmImage image_tensor_to_pfm(const Tensor<T>& t) {
  PfmImage img;
  img.channels = 3;
  img.height = t.dim(1);
  img.width = t.dim(2);
  img.data.resize(static_cast<std::size_t>(img.width * img.height * 3));
  for (int c = 0; c < 3; ++c)
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x)
        img.at(y, x, c) = static_cast<float>(t.at(c, y, x));
  return img;
}

}  // namespace objcavit
