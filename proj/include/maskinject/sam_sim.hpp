#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/random.hpp"
#include "maskinject/tspp.hpp"

namespace maskinject {

struct SamSimConfig {
  int split_min = 1;
  int split_max = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (split_min < 1 || split_max < split_min) throw Error("SamSimConfig: need 1 <= split_min <= split_max");
  }
};

/// Partition of one region into Voronoi sub-patches. `owner[i]` is the
/// sub-patch of the region's i-th pixel (raster order).
struct RegionSplit {
  std::vector<std::size_t> pixels;
  std::vector<int> owner;
  int parts = 0;
};

/// Splits the pixels of `label` into `parts` Voronoi cells around seeds
/// drawn uniformly from the region; ties go to the lowest seed index.
inline RegionSplit voronoi_split(const LabelMap& lm, std::uint32_t label, int parts, Rng& rng) {
  RegionSplit r;
  r.parts = parts;
  for (std::size_t i = 0; i < lm.labels.size(); ++i)
    if (lm.labels[i] == label) r.pixels.push_back(i);
  if (r.pixels.empty()) return r;
  std::vector<std::int64_t> sx(parts), sy(parts);
  for (int s = 0; s < parts; ++s) {
    const auto p = r.pixels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(r.pixels.size()) - 1))];
    sx[s] = static_cast<std::int64_t>(p % lm.width);
    sy[s] = static_cast<std::int64_t>(p / lm.width);
  }
  r.owner.resize(r.pixels.size());
  for (std::size_t i = 0; i < r.pixels.size(); ++i) {
    const std::int64_t x = static_cast<std::int64_t>(r.pixels[i] % lm.width);
    const std::int64_t y = static_cast<std::int64_t>(r.pixels[i] / lm.width);
    int best = 0;
    std::int64_t best_d = -1;
    for (int s = 0; s < parts; ++s) {
      const std::int64_t d = (x - sx[s]) * (x - sx[s]) + (y - sy[s]) * (y - sy[s]);
      if (best_d < 0 || d < best_d) {
        best = s;
        best_d = d;
      }
    }
    r.owner[i] = best;
  }
  return r;
}

/// Split of region `label` as the simulator sees it: split count and seeds
/// come from the stream (cfg.seed, label), independent of the prompts.
inline RegionSplit region_split(const LabelMap& gt, std::uint32_t label, const SamSimConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, label));
  const int parts = static_cast<int>(rng.uniform_int(cfg.split_min, cfg.split_max));
  return voronoi_split(gt, label, parts, rng);
}

/// Stand-in for a promptable segmenter. Each prompt on a labelled region
/// returns the Voronoi sub-patch of that region containing the prompt.
/// Background prompts return nothing, repeated sub-patches are emitted
/// once, and output order follows the first prompt hitting each sub-patch.
inline MaskSet simulate_sam(const LabelMap& gt, const PointPrompts& points, const SamSimConfig& cfg) {
  cfg.validate();
  MaskSet out(gt.width, gt.height, true);
  std::map<std::uint32_t, RegionSplit> splits;
  std::map<std::pair<std::uint32_t, int>, bool> emitted;
  for (const auto& pt : points.points) {
    const int x = static_cast<int>(std::floor(pt.x)), y = static_cast<int>(std::floor(pt.y));
    if (x < 0 || y < 0 || x >= gt.width || y >= gt.height)
      throw Error("simulate_sam: prompt (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) +
                  ") lies outside the canvas");
    const std::uint32_t label = gt.at(x, y);
    if (label == 0) continue;
    auto it = splits.find(label);
    if (it == splits.end()) it = splits.emplace(label, region_split(gt, label, cfg)).first;
    const auto& split = it->second;
    const std::size_t idx = static_cast<std::size_t>(y) * gt.width + x;
    const auto pos = std::lower_bound(split.pixels.begin(), split.pixels.end(), idx);
    const int part = split.owner[static_cast<std::size_t>(pos - split.pixels.begin())];
    if (emitted[{label, part}]) continue;
    emitted[{label, part}] = true;
    BinaryMask m(gt.width, gt.height);
    for (std::size_t i = 0; i < split.pixels.size(); ++i)
      if (split.owner[i] == part) m.set_index(split.pixels[i]);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace maskinject
