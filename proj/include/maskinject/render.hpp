#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/io.hpp"

namespace maskinject {

/// Blue-to-red colormap. Finite values are min-max normalised to v in
/// [0, 1] and mapped to (round(255 v), 0, round(255 (1 - v))). A constant
/// field skips normalisation and uses its value clamped to [0, 1]. NaN
/// (e.g. outside a mask) renders black.
inline std::vector<std::uint8_t> heatmap_rgb(std::span<const double> values) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values) {
    if (std::isinf(v)) throw Error("heatmap: infinite value");
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<std::uint8_t> rgb(values.size() * 3, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values[i];
    if (std::isnan(x)) continue;
    const double v = hi > lo ? (x - lo) / (hi - lo) : std::clamp(x, 0.0, 1.0);
    rgb[3 * i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    rgb[3 * i + 2] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - v)));
  }
  return rgb;
}

/// Writes a w x h field as a PPM, each value drawn as a scale x scale block.
inline void render_heatmap(std::span<const double> values, int width, int height, const std::string& path,
                           int scale = 1) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw Error("render_heatmap: size mismatch");
  if (scale < 1) throw Error("render_heatmap: scale must be >= 1");
  const auto rgb = heatmap_rgb(values);
  const int W = width * scale, H = height * scale;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c)
        img[(static_cast<std::size_t>(y) * W + x) * 3 + c] =
            rgb[(static_cast<std::size_t>(y / scale) * width + x / scale) * 3 + c];
  io::write_ppm(path, W, H, img);
}

}  // namespace maskinject
