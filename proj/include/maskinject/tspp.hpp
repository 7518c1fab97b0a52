#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/geometry.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/random.hpp"

namespace maskinject {

struct SamplerConfig {
  int g_p = 5;    // mask area per expected point
  int m_p = 10;   // cap on expected points per mask
  int grid_h = 32;
  int grid_w = 32;
  std::uint64_t seed = 0;
  bool area_in_pixels = false;  // count area in image pixels instead of grid cells

  void validate() const {
    if (g_p < 1 || m_p < 1) throw Error("SamplerConfig: g_p and m_p must be >= 1");
    if (grid_h < 1 || grid_w < 1) throw Error("SamplerConfig: grid must be at least 1x1");
  }
};

/// Per-cell sampling probabilities. `raw` is the unclamped target mass,
/// `probs` the Bernoulli parameters.
struct ProbabilityGrid {
  int grid_h = 0;
  int grid_w = 0;
  std::vector<double> probs;
  std::vector<double> raw;

  ProbabilityGrid() = default;
  ProbabilityGrid(int h, int w)
      : grid_h(h), grid_w(w), probs(static_cast<std::size_t>(h) * w, 0.0),
        raw(static_cast<std::size_t>(h) * w, 0.0) {}

  std::size_t cells() const { return probs.size(); }

  double expected_count() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
  }
  double raw_mass() const {
    double s = 0.0;
    for (double p : raw) s += p;
    return s;
  }
};

struct PointPrompt {
  double x = 0.0;  // image pixels
  double y = 0.0;
  int cell = 0;    // row-major grid index
  double prob = 0.0;
};

struct PointPrompts {
  std::vector<PointPrompt> points;
  std::size_t count() const { return points.size(); }
};

// Grid-to-image mapping. Cell (i, j) has image-space center
// ((j + 0.5) W / grid_w, (i + 0.5) H / grid_h).

inline double cell_center_x(int j, int grid_w, int image_w) {
  return (j + 0.5) * static_cast<double>(image_w) / grid_w;
}
inline double cell_center_y(int i, int grid_h, int image_h) {
  return (i + 0.5) * static_cast<double>(image_h) / grid_h;
}
/// Pixel containing the cell center, computed in integers.
inline int cell_center_px(int j, int grid, int image) {
  return static_cast<int>((static_cast<long>(2 * j + 1) * image) / (2L * grid));
}

/// Grid mask whose cell (i, j) is set iff the cell's center pixel is set.
inline BinaryMask rasterize_to_grid(const BinaryMask& m, int grid_h, int grid_w) {
  BinaryMask out(grid_w, grid_h);
  for (int i = 0; i < grid_h; ++i)
    for (int j = 0; j < grid_w; ++j)
      if (m.get(cell_center_px(j, grid_w, m.width()), cell_center_px(i, grid_h, m.height())))
        out.set(j, i);
  return out;
}

/// Label of each cell's center pixel.
inline LabelMap sample_labels_at_centers(const LabelMap& lm, int grid_h, int grid_w) {
  LabelMap out(grid_w, grid_h);
  for (int i = 0; i < grid_h; ++i)
    for (int j = 0; j < grid_w; ++j)
      out.at(j, i) = lm.at(cell_center_px(j, grid_w, lm.width), cell_center_px(i, grid_h, lm.height));
  return out;
}

/// min(ceil(area / g_p), m_p); zero for zero area.
inline int expected_points_for_area(std::size_t area, const SamplerConfig& cfg) {
  if (area == 0) return 0;
  const std::size_t per = static_cast<std::size_t>(cfg.g_p);
  const std::size_t ceil_div = (area + per - 1) / per;
  return static_cast<int>(std::min<std::size_t>(ceil_div, static_cast<std::size_t>(cfg.m_p)));
}

inline int expected_points(const BinaryMask& m, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t area =
      cfg.area_in_pixels ? m.area() : rasterize_to_grid(m, cfg.grid_h, cfg.grid_w).area();
  return expected_points_for_area(area, cfg);
}

struct ProbabilityTarget {
  ProbabilityGrid grid;
  std::vector<int> expected;          // P_k per input mask (0 when skipped)
  std::vector<double> sigma;          // bandwidth per input mask
  std::vector<std::size_t> skipped;   // masks with no cell center inside
};

/// Sampling target from disjoint ground-truth masks: each mask's P_k
/// expected points are spread over its cells with a Gaussian in the
/// distance to the mask skeleton.
inline ProbabilityTarget probability_target(const MaskSet& gt, const SamplerConfig& cfg) {
  cfg.validate();
  if (!gt.verify_disjoint()) throw Error("probability_target: ground-truth masks overlap");
  ProbabilityTarget out;
  out.grid = ProbabilityGrid(cfg.grid_h, cfg.grid_w);
  out.expected.assign(gt.size(), 0);
  out.sigma.assign(gt.size(), 0.0);

  for (std::size_t k = 0; k < gt.size(); ++k) {
    const auto& mask = gt[k];
    if (mask.empty()) {
      out.skipped.push_back(k);
      continue;
    }
    std::vector<int> cells;
    std::vector<double> weights;
    const auto field = skeleton_distance_field(mask);
    const double sigma = bandwidth(field, mask);
    for (int i = 0; i < cfg.grid_h; ++i) {
      const int py = cell_center_px(i, cfg.grid_h, mask.height());
      for (int j = 0; j < cfg.grid_w; ++j) {
        const int px = cell_center_px(j, cfg.grid_w, mask.width());
        if (!mask.get(px, py)) continue;
        cells.push_back(i * cfg.grid_w + j);
        weights.push_back(skeleton_gaussian(field.at(px, py), sigma));
      }
    }
    if (cells.empty()) {
      out.skipped.push_back(k);
      continue;
    }
    const std::size_t area = cfg.area_in_pixels ? mask.area() : cells.size();
    const int pk = expected_points_for_area(area, cfg);
    double norm = 0.0;
    for (double w : weights) norm += w;
    for (std::size_t c = 0; c < cells.size(); ++c) out.grid.raw[cells[c]] = weights[c] * pk / norm;
    out.expected[k] = pk;
    out.sigma[k] = sigma;
  }
  for (std::size_t c = 0; c < out.grid.cells(); ++c) out.grid.probs[c] = std::min(out.grid.raw[c], 1.0);
  return out;
}

/// Independent Bernoulli draw per cell (raster order, one RNG stream).
inline PointPrompts sample_points(const ProbabilityGrid& p, std::uint64_t seed, int image_w, int image_h) {
  Rng rng(seed);
  PointPrompts out;
  for (int i = 0; i < p.grid_h; ++i) {
    for (int j = 0; j < p.grid_w; ++j) {
      const int c = i * p.grid_w + j;
      const double u = rng.uniform();
      if (u < p.probs[c])
        out.points.push_back({cell_center_x(j, p.grid_w, image_w), cell_center_y(i, p.grid_h, image_h), c,
                              p.probs[c]});
    }
  }
  return out;
}

inline PointPrompts sample_points(const ProbabilityGrid& p, const SamplerConfig& cfg, int image_w, int image_h) {
  return sample_points(p, cfg.seed, image_w, image_h);
}

/// Every cell center of the grid, the dense-prompting baseline.
inline PointPrompts grid_points(int grid_h, int grid_w, int image_w, int image_h) {
  PointPrompts out;
  for (int i = 0; i < grid_h; ++i)
    for (int j = 0; j < grid_w; ++j)
      out.points.push_back({cell_center_x(j, grid_w, image_w), cell_center_y(i, grid_h, image_h),
                            i * grid_w + j, 1.0});
  return out;
}

/// Class masks from per-cell logits (K x h x w). A cell goes to its argmax
/// class (ties to the lower index) when that class's logit exceeds
/// `threshold`; otherwise it is background. Pass -infinity to disable the
/// background test.
inline MaskSet text_masks_from_logits(std::span<const double> logits, int classes, int h, int w,
                                      double threshold = 0.0) {
  if (logits.size() != static_cast<std::size_t>(classes) * h * w)
    throw Error("text_masks_from_logits: logit count does not match K*h*w");
  MaskSet out(w, h, true);
  for (int k = 0; k < classes; ++k) out.masks.emplace_back(w, h);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t c = 0; c < plane; ++c) {
    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < classes; ++k) {
      const double v = logits[k * plane + c];
      if (best < 0 || v > best_v) {
        best = k;
        best_v = v;
      }
    }
    if (best >= 0 && best_v > threshold) out.masks[best].set_index(c);
  }
  return out;
}

}  // namespace maskinject
