#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ihpe/geometry.hpp"

namespace ihpe {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool in_bounds(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  std::array<std::uint8_t, 3> get(int u, int v) const {
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int u, int v, std::array<std::uint8_t, 3> c) {
    if (!in_bounds(u, v)) return;
    const std::size_t i = (static_cast<std::size_t>(v) * width + u) * 3;
    data[i] = c[0];
    data[i + 1] = c[1];
    data[i + 2] = c[2];
  }
};

/// 16-bit greyscale PNG in millimetres; zero reads as background.
DepthImage read_depth_png(const std::filesystem::path& path, float background = kDefaultBackground);
/// Background and depths above 65535 are written as zero; depths are rounded.
void write_depth_png(const std::filesystem::path& path, const DepthImage& img);

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_rgb_png(const std::filesystem::path& path);

}  // namespace ihpe
