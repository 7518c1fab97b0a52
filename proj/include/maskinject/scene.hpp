#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/random.hpp"
#include "maskinject/tspp.hpp"
#include "maskinject/tspp_head.hpp"

namespace maskinject {

enum class ShapeFamily { rectangles, ellipses, blobs, mixed };

inline ShapeFamily parse_shape_family(const std::string& s) {
  if (s == "rectangles") return ShapeFamily::rectangles;
  if (s == "ellipses") return ShapeFamily::ellipses;
  if (s == "blobs") return ShapeFamily::blobs;
  if (s == "mixed") return ShapeFamily::mixed;
  throw Error("unknown shape family '" + s + "' (rectangles, ellipses, blobs, mixed)");
}

inline std::string shape_family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::rectangles: return "rectangles";
    case ShapeFamily::ellipses: return "ellipses";
    case ShapeFamily::blobs: return "blobs";
    case ShapeFamily::mixed: return "mixed";
  }
  return "?";
}

struct SceneConfig {
  int width = 512;
  int height = 512;
  int n_objects = 6;
  int classes = 4;
  ShapeFamily shape = ShapeFamily::mixed;
  double noise = 0.1;    // uniform cost noise amplitude
  int split_min = 1;     // Voronoi sub-patches per object, inclusive range
  int split_max = 1;
  int cost_factor = 16;  // image pixels per cost-map cell
  int min_extent = 40;   // object bounding-box side, pixels
  int max_extent = 140;
  int max_retries = 500; // placement attempts per object
  std::uint64_t seed = 0;

  int cost_h() const { return height / cost_factor; }
  int cost_w() const { return width / cost_factor; }

  void validate() const {
    if (width < 1 || height < 1) throw Error("SceneConfig: canvas must be at least 1x1");
    if (n_objects < 0) throw Error("SceneConfig: n_objects must be >= 0");
    if (n_objects > 255) throw Error("SceneConfig: at most 255 objects fit in a PGM label map");
    if (classes < 1) throw Error("SceneConfig: classes must be >= 1");
    if (!(noise >= 0)) throw Error("SceneConfig: noise must be >= 0");
    if (split_min < 1 || split_max < split_min) throw Error("SceneConfig: need 1 <= split_min <= split_max");
    if (cost_factor < 1 || width % cost_factor != 0 || height % cost_factor != 0)
      throw Error("SceneConfig: cost_factor must divide the canvas");
    if (min_extent < 1 || max_extent < min_extent) throw Error("SceneConfig: need 1 <= min_extent <= max_extent");
    if (max_retries < 1) throw Error("SceneConfig: max_retries must be >= 1");
  }
};

struct Scene {
  LabelMap instances;             // object i has label i + 1
  LabelMap semantic;              // class k has label k + 1
  std::vector<int> object_class;  // class of object i
  CostMap cost;                   // K x (H / f) x (W / f), values in [-1, 1]
};

namespace detail {

/// Object footprint inside a w x h box.
inline BinaryMask draw_shape(ShapeFamily family, int w, int h, Rng& rng) {
  BinaryMask m(w, h);
  const double cx = w / 2.0, cy = h / 2.0;
  switch (family) {
    case ShapeFamily::rectangles:
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y);
      break;
    case ShapeFamily::ellipses: {
      const double a = w / 2.0, b = h / 2.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = (x + 0.5 - cx) / a, v = (y + 0.5 - cy) / b;
          if (u * u + v * v <= 1.0) m.set(x, y);
        }
      break;
    }
    case ShapeFamily::blobs: {
      // Star-shaped: radius modulated by two low harmonics, never below 0.55.
      const double a1 = rng.uniform(0.0, 0.25), a2 = rng.uniform(0.0, 0.2);
      const double p1 = rng.uniform(0.0, 6.283185307179586), p2 = rng.uniform(0.0, 6.283185307179586);
      const double norm = 1.0 + a1 + a2;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double u = (x + 0.5 - cx) / (w / 2.0), v = (y + 0.5 - cy) / (h / 2.0);
          const double t = std::atan2(v, u);
          const double r = (1.0 + a1 * std::cos(2 * t + p1) + a2 * std::cos(3 * t + p2)) / norm;
          if (u * u + v * v <= r * r) m.set(x, y);
        }
      break;
    }
    case ShapeFamily::mixed:
      throw Error("draw_shape: mixed is not a concrete shape");
  }
  return m;
}

/// 3x3 mean with out-of-canvas treated as zero.
inline std::vector<double> box3(const std::vector<double>& plane, int h, int w) {
  std::vector<double> out(plane.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w) s += plane[static_cast<std::size_t>(yy) * w + xx];
        }
      out[static_cast<std::size_t>(y) * w + x] = s / 9.0;
    }
  return out;
}

}  // namespace detail

/// Synthetic per-class cost map from a semantic label map. For class k the
/// indicator ind_k is the block-majority downsample of the class mask; the
/// noiseless cost is ind + box3(ind) - 1, which is positive exactly on the
/// indicator's support. Noise is uniform in [-noise, noise], drawn in
/// (class, row, column) order; the result is clamped to [-1, 1].
inline CostMap synth_cost_map(const LabelMap& semantic, int classes, int factor, double noise, Rng& rng) {
  const auto cm = class_masks(semantic, classes);
  const int h = semantic.height / factor, w = semantic.width / factor;
  CostMap cost(classes, h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int k = 0; k < classes; ++k) {
    const auto ind_mask = downsample_mask(cm[k], factor);
    std::vector<double> ind(plane);
    for (std::size_t c = 0; c < plane; ++c) ind[c] = ind_mask[c] ? 1.0 : 0.0;
    const auto blur = detail::box3(ind, h, w);
    for (std::size_t c = 0; c < plane; ++c) {
      double v = ind[c] + blur[c] - 1.0;
      if (noise > 0) v += rng.uniform(-noise, noise);
      cost.values[k * plane + c] = std::clamp(v, -1.0, 1.0);
    }
  }
  return cost;
}

/// Places n_objects non-overlapping shapes with random classes and builds
/// the matching cost map. Deterministic in cfg.seed.
inline Scene gen_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Scene s;
  s.instances = LabelMap(cfg.width, cfg.height);
  s.semantic = LabelMap(cfg.width, cfg.height);
  const int max_w = std::min(cfg.max_extent, cfg.width), max_h = std::min(cfg.max_extent, cfg.height);
  const int min_w = std::min(cfg.min_extent, max_w), min_h = std::min(cfg.min_extent, max_h);

  for (int obj = 0; obj < cfg.n_objects; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      ShapeFamily family = cfg.shape;
      if (family == ShapeFamily::mixed) family = static_cast<ShapeFamily>(rng.uniform_int(0, 2));
      const int w = static_cast<int>(rng.uniform_int(min_w, max_w));
      const int h = static_cast<int>(rng.uniform_int(min_h, max_h));
      const int x0 = static_cast<int>(rng.uniform_int(0, cfg.width - w));
      const int y0 = static_cast<int>(rng.uniform_int(0, cfg.height - h));
      const auto shape = detail::draw_shape(family, w, h, rng);
      bool clash = shape.empty();
      for (int y = 0; y < h && !clash; ++y)
        for (int x = 0; x < w && !clash; ++x)
          if (shape.get(x, y) && s.instances.at(x0 + x, y0 + y) != 0) clash = true;
      if (clash) continue;
      const int cls = static_cast<int>(rng.uniform_int(0, cfg.classes - 1));
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (shape.get(x, y)) {
            s.instances.at(x0 + x, y0 + y) = static_cast<std::uint32_t>(obj + 1);
            s.semantic.at(x0 + x, y0 + y) = static_cast<std::uint32_t>(cls + 1);
          }
      s.object_class.push_back(cls);
      placed = true;
    }
    if (!placed)
      throw Error("gen_scene: could not place object " + std::to_string(obj + 1) + " of " +
                  std::to_string(cfg.n_objects) + " after " + std::to_string(cfg.max_retries) + " attempts");
  }
  s.cost = synth_cost_map(s.semantic, cfg.classes, cfg.cost_factor, cfg.noise, rng);
  return s;
}

/// Supervision for the point-prompt head at the cost-map resolution.
inline TrainingItem make_training_item(const Scene& s, const SamplerConfig& sampler) {
  if (sampler.grid_h != s.cost.height || sampler.grid_w != s.cost.width)
    throw Error("make_training_item: sampler grid must match the cost-map grid");
  TrainingItem item;
  item.cost = s.cost;
  item.labels = sample_labels_at_centers(s.semantic, sampler.grid_h, sampler.grid_w);
  item.target = probability_target(class_masks(s.semantic, s.cost.classes), sampler).grid;
  return item;
}

struct SuiteConfig {
  SceneConfig scene;  // seed and n_objects are set per scene
  int scenes = 20;
  int min_objects = 1;
  int max_objects = 12;
  std::uint64_t seed = 0;

  void validate() const {
    if (scenes < 1) throw Error("SuiteConfig: scenes must be >= 1");
    if (min_objects < 0 || max_objects < min_objects) throw Error("SuiteConfig: need 0 <= min_objects <= max_objects");
  }
};

/// Config of scene i: object count and seed drawn from stream (seed, i), so
/// any scene can be rebuilt on its own.
inline SceneConfig suite_scene_config(const SuiteConfig& suite, int index) {
  SceneConfig c = suite.scene;
  Rng rng(derive_seed(suite.seed, static_cast<std::uint64_t>(index)));
  c.n_objects = static_cast<int>(rng.uniform_int(suite.min_objects, suite.max_objects));
  c.seed = rng.next();
  return c;
}

}  // namespace maskinject
