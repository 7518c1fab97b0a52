#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maskinject/dmi.hpp"
#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/random.hpp"
#include "maskinject/sam_sim.hpp"
#include "maskinject/scene.hpp"
#include "maskinject/smagg.hpp"
#include "maskinject/tspp.hpp"
#include "maskinject/tspp_head.hpp"

namespace maskinject {

enum class PromptSource { head, target };

inline PromptSource parse_prompt_source(const std::string& s) {
  if (s == "head") return PromptSource::head;
  if (s == "target") return PromptSource::target;
  throw Error("unknown prompt source '" + s + "' (head, target)");
}

struct PipelineConfig {
  SamplerConfig sampler;
  int split_min = 1;
  int split_max = 1;
  SmaggConfig smagg;
  bool use_smagg = true;
  bool inject = true;
  PromptSource prompts = PromptSource::head;
  double text_threshold = 0.0;
  std::uint64_t seed = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineDiagnostics {
  std::size_t n_points = 0;    // N_p
  std::size_t n_proposals = 0; // N_s
  std::size_t n_merged = 0;    // N_m
  std::size_t n_injected = 0;  // masks non-empty at the feature grid
  bool conserved = true;       // union after aggregation == union of proposals
  double miou = 0.0;
  std::vector<StageTiming> timings;
};

struct PipelineResult {
  LabelMap semantic;  // grid resolution
  PointPrompts points;
  MaskSet proposals;
  AggregationResult aggregated;
  PipelineDiagnostics diag;
};

/// Mean IoU over the classes present in either map; 1 when both are empty.
inline double mean_iou(const LabelMap& pred, const LabelMap& gt, int classes) {
  if (pred.width != gt.width || pred.height != gt.height) throw Error("mean_iou: shape mismatch");
  double sum = 0.0;
  int n = 0;
  for (int k = 1; k <= classes; ++k) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      const bool a = pred.labels[i] == static_cast<std::uint32_t>(k), b = gt.labels[i] == static_cast<std::uint32_t>(k);
      inter += a && b;
      uni += a || b;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++n;
  }
  return n == 0 ? 1.0 : sum / n;
}

/// Low-resolution features: the K cost channels followed by normalised x and
/// y coordinates of each cell center.
inline FeatureMap cost_features(const CostMap& cost) {
  const int K = cost.classes, h = cost.height, w = cost.width;
  FeatureMap f(K + 2, h, w);
  std::copy(cost.values.begin(), cost.values.end(), f.values.begin());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f.at(K, y, x) = (x + 0.5) / w;
      f.at(K + 1, y, x) = (y + 0.5) / h;
    }
  return f;
}

inline FeatureMap upsample_features(const FeatureMap& f, int factor) {
  FeatureMap out(f.channels, f.height * factor, f.width * factor);
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = f.at(c, y / factor, x / factor);
  return out;
}

inline FeatureMap avgpool_features(const FeatureMap& f, int factor) {
  if (f.height % factor != 0 || f.width % factor != 0) throw Error("avgpool_features: factor does not divide");
  FeatureMap out(f.channels, f.height / factor, f.width / factor);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) s += f.at(c, y * factor + dy, x * factor + dx);
        out.at(c, y, x) = s * inv;
      }
  return out;
}

/// Per-cell labels from class scores: argmax class (lowest on ties) when its
/// score exceeds `threshold`, else background.
inline LabelMap readout_labels(const CostMap& cost, double threshold) {
  LabelMap out(cost.width, cost.height);
  const std::size_t plane = cost.plane();
  for (std::size_t c = 0; c < plane; ++c) {
    int best = 0;
    for (int k = 1; k < cost.classes; ++k)
      if (cost.values[k * plane + c] > cost.values[best * plane + c]) best = k;
    if (cost.values[best * plane + c] > threshold) out.labels[c] = static_cast<std::uint32_t>(best + 1);
  }
  return out;
}

/// Masks at a coarser resolution with empty members dropped; `tags` keeps
/// the class of each surviving member (-1 when unmatched).
struct CoarseMasks {
  MaskSet masks;
  std::vector<int> tags;
};

inline CoarseMasks coarse_masks(const AggregationResult& agg, int factor) {
  const auto down = downsample_masks(agg.masks, factor);
  CoarseMasks out{MaskSet(down.width, down.height, false), {}};
  for (std::size_t i = 0; i < down.size(); ++i) {
    if (down[i].empty()) continue;
    out.masks.push_back(down[i]);
    out.tags.push_back(agg.class_of[i] ? *agg.class_of[i] : -1);
  }
  out.masks.disjoint = out.masks.verify_disjoint();
  return out;
}

/// Guidance features after mask injection:
///   G = low_freq_inject(F_l, masks at the grid)
///     + avgpool2(high_freq_inject(F_h, masks at 2x grid) - F_h),
/// with F_h the 2x nearest upsample of F_l.
inline FeatureMap injected_features(const FeatureMap& f_l, const CoarseMasks& low, const CoarseMasks& high,
                                    const HighFreqParams& hf) {
  auto g = low_freq_inject(f_l, low.masks);
  const auto f_h = upsample_features(f_l, 2);
  auto f_h2 = high_freq_inject(f_h, high.masks, hf, high.tags);
  for (std::size_t i = 0; i < f_h2.values.size(); ++i) f_h2.values[i] -= f_h.values[i];
  const auto delta = avgpool_features(f_h2, 2);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += delta.values[i];
  return g;
}

/// Head parameters for the branch that leave it an exact identity.
inline HighFreqParams default_high_freq_params(int channels, std::uint64_t seed) {
  return HighFreqParams::init(channels, seed, true);
}

/// Full chain on one scene: point-prompt head, Bernoulli sampling, simulated
/// segmenter, aggregation against the text masks, mask injection, and a
/// per-cell readout. Cells covered by an injected mask take the argmax of
/// the injected class channels; other cells keep the thresholded cost
/// argmax. With injection off every cell uses the cost argmax.
inline PipelineResult run_pipeline(const Scene& scene, const TsppHeadParams& head, const PipelineConfig& cfg,
                                   const std::optional<HighFreqParams>& high_freq = std::nullopt) {
  using clock = std::chrono::steady_clock;
  const auto& cost = scene.cost;
  const int K = cost.classes, gh = cost.height, gw = cost.width;
  const int W = scene.instances.width, H = scene.instances.height;
  if (cfg.sampler.grid_h != gh || cfg.sampler.grid_w != gw)
    throw Error("run_pipeline: sampler grid must match the cost-map grid");
  if (W % gw != 0 || H % gh != 0 || W / gw != H / gh || (W / gw) % 2 != 0)
    throw Error("run_pipeline: canvas must be an even multiple of the cost grid");
  const int factor = W / gw;

  PipelineResult r;
  auto t = clock::now();
  auto lap = [&](const char* stage) {
    const auto now = clock::now();
    r.diag.timings.push_back({stage, std::chrono::duration<double>(now - t).count()});
    t = now;
  };

  ProbabilityGrid probs = cfg.prompts == PromptSource::head
                              ? head_forward(cost, head).pred
                              : probability_target(class_masks(scene.semantic, K), cfg.sampler).grid;
  lap("prompter");
  r.points = sample_points(probs, derive_seed(cfg.seed, 1), W, H);
  lap("sampling");
  r.proposals = simulate_sam(scene.instances, r.points, {cfg.split_min, cfg.split_max, derive_seed(cfg.seed, 2)});
  lap("segmenter");
  const auto text = text_masks_from_logits(cost.values, K, gh, gw, cfg.text_threshold);
  r.aggregated = cfg.use_smagg ? aggregate(r.proposals, text, cfg.smagg) : passthrough(r.proposals);
  r.diag.conserved = union_all(r.aggregated.masks) == union_all(r.proposals);
  lap("aggregation");

  r.semantic = readout_labels(cost, cfg.text_threshold);
  if (cfg.inject) {
    const auto f_l = cost_features(cost);
    const auto low = coarse_masks(r.aggregated, factor);
    const auto high = coarse_masks(r.aggregated, factor / 2);
    const auto hf = high_freq ? *high_freq : default_high_freq_params(f_l.channels, derive_seed(cfg.seed, 3));
    const auto g = injected_features(f_l, low, high, hf);
    const auto covered = union_all(low.masks);
    const std::size_t plane = g.plane();
    for (std::size_t c = 0; c < plane; ++c) {
      if (!covered[c]) continue;
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (g.values[k * plane + c] > g.values[best * plane + c]) best = k;
      r.semantic.labels[c] = static_cast<std::uint32_t>(best + 1);
    }
    r.diag.n_injected = low.masks.size();
  }
  lap("injection");

  r.diag.n_points = r.points.count();
  r.diag.n_proposals = r.proposals.size();
  r.diag.n_merged = r.aggregated.masks.size();
  r.diag.miou = mean_iou(r.semantic, sample_labels_at_centers(scene.semantic, gh, gw), K);
  return r;
}

}  // namespace maskinject
