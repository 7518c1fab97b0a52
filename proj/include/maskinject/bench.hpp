#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/parallel.hpp"
#include "maskinject/pipeline.hpp"
#include "maskinject/random.hpp"
#include "maskinject/scene.hpp"
#include "maskinject/tspp.hpp"
#include "maskinject/tspp_head.hpp"

namespace maskinject {

/// Reference point counts reported for the published model; carried in
/// reports as annotations only.
struct PublishedReference {
  static constexpr int grid_points = 1024;
  static constexpr int tspp_points_ade150 = 41;
  static constexpr int tspp_points_pc59 = 37;
  static constexpr double reduction_percent = 96.0;
};

inline std::vector<Scene> gen_suite(const SuiteConfig& suite, unsigned threads = 1) {
  suite.validate();
  std::vector<Scene> scenes(static_cast<std::size_t>(suite.scenes));
  parallel_for(scenes.size(), threads,
               [&](std::size_t i) { scenes[i] = gen_scene(suite_scene_config(suite, static_cast<int>(i))); });
  return scenes;
}

/// Pipeline over a suite; scene i runs with seed derive_seed(cfg.seed, i).
inline std::vector<PipelineResult> run_suite(const std::vector<Scene>& scenes, const TsppHeadParams& head,
                                             const PipelineConfig& cfg, unsigned threads = 1) {
  std::vector<PipelineResult> out(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    auto c = cfg;
    c.seed = derive_seed(cfg.seed, i);
    out[i] = run_pipeline(scenes[i], head, c);
  });
  return out;
}

enum class Strategy { grid32, random_k, tspp_target, tspp_head };

inline Strategy parse_strategy(const std::string& s) {
  if (s == "grid32") return Strategy::grid32;
  if (s == "random-k") return Strategy::random_k;
  if (s == "tspp-target") return Strategy::tspp_target;
  if (s == "tspp-head") return Strategy::tspp_head;
  throw Error("unknown strategy '" + s + "' (grid32, random-k, tspp-target, tspp-head)");
}

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::grid32: return "grid32";
    case Strategy::random_k: return "random-k";
    case Strategy::tspp_target: return "tspp-target";
    case Strategy::tspp_head: return "tspp-head";
  }
  return "?";
}

struct StrategyStats {
  std::string name;
  double mean_points = 0.0;
  double recall = 0.0;                 // hit masks / all ground-truth masks
  double seconds_per_image = 0.0;      // wall clock; not part of any output file
  std::size_t masks = 0;
  std::size_t hits = 0;
  std::vector<std::size_t> points;     // per (scene, repeat), scene-major
};

struct BenchReport {
  std::size_t images = 0;
  int repeats = 1;
  std::vector<StrategyStats> strategies;

  const StrategyStats& get(const std::string& name) const {
    for (const auto& s : strategies)
      if (s.name == name) return s;
    throw Error("BenchReport: no strategy '" + name + "'");
  }
};

struct BenchConfig {
  SamplerConfig sampler;
  std::vector<Strategy> strategies{Strategy::grid32, Strategy::random_k, Strategy::tspp_target};
  int repeats = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {

/// Number of ground-truth class masks hit by at least one prompt.
inline std::size_t masks_hit(const MaskSet& gt, const PointPrompts& pts) {
  std::size_t hits = 0;
  for (const auto& m : gt.masks) {
    for (const auto& p : pts.points) {
      if (m.get(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)))) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

/// k distinct cell centers chosen uniformly (partial Fisher-Yates).
inline PointPrompts random_cells(int k, int grid_h, int grid_w, int image_w, int image_h, Rng& rng) {
  std::vector<int> cells(static_cast<std::size_t>(grid_h) * grid_w);
  std::iota(cells.begin(), cells.end(), 0);
  k = std::min<int>(k, static_cast<int>(cells.size()));
  PointPrompts out;
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, static_cast<std::int64_t>(cells.size()) - 1));
    std::swap(cells[static_cast<std::size_t>(i)], cells[j]);
    const int c = cells[static_cast<std::size_t>(i)];
    out.points.push_back({cell_center_x(c % grid_w, grid_w, image_w), cell_center_y(c / grid_w, grid_h, image_h), c,
                          1.0});
  }
  return out;
}

}  // namespace detail

/// Prompt count and ground-truth coverage per sampling strategy. Prompts of
/// scene i, repeat r come from stream derive_seed(derive_seed(seed, i), r).
/// random-k draws as many distinct cells as tspp-target sampled for the
/// same (scene, repeat), so the two are paired at equal budget.
inline BenchReport bench_sampling(const std::vector<Scene>& suite, const BenchConfig& cfg,
                                  const std::optional<TsppHeadParams>& head = std::nullopt) {
  if (suite.empty()) throw Error("bench_sampling: empty suite");
  if (cfg.repeats < 1) throw Error("bench_sampling: repeats must be >= 1");
  cfg.sampler.validate();
  const bool need_head =
      std::find(cfg.strategies.begin(), cfg.strategies.end(), Strategy::tspp_head) != cfg.strategies.end();
  if (need_head && !head) throw Error("bench_sampling: tspp-head strategy needs head parameters");

  const std::size_t S = cfg.strategies.size(), n = suite.size(), R = static_cast<std::size_t>(cfg.repeats);
  struct Cell {
    std::vector<std::size_t> points, hits;
    std::vector<double> seconds;
    std::size_t masks = 0;
  };
  std::vector<Cell> cells(n * R);
  const int gh = cfg.sampler.grid_h, gw = cfg.sampler.grid_w;

  parallel_for(n * R, cfg.threads, [&](std::size_t idx) {
    const std::size_t i = idx / R, r = idx % R;
    const auto& scene = suite[i];
    const int W = scene.semantic.width, H = scene.semantic.height;
    const auto gt = class_masks(scene.semantic, scene.cost.classes);
    MaskSet nonempty(W, H, true);
    for (const auto& m : gt.masks)
      if (!m.empty()) nonempty.push_back(m);
    const std::uint64_t base = derive_seed(derive_seed(cfg.seed, i), r);

    using clock = std::chrono::steady_clock;
    const bool need_tspp = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), [](Strategy s) {
      return s == Strategy::tspp_target || s == Strategy::random_k;
    });
    PointPrompts tspp;
    double tspp_seconds = 0.0;
    if (need_tspp) {
      const auto t0 = clock::now();
      tspp = sample_points(probability_target(gt, cfg.sampler).grid, derive_seed(base, 0), W, H);
      tspp_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    Cell& cell = cells[idx];
    cell.masks = nonempty.size();
    for (std::size_t s = 0; s < S; ++s) {
      const auto t0 = clock::now();
      double extra = 0.0;
      PointPrompts pts;
      switch (cfg.strategies[s]) {
        case Strategy::grid32: pts = grid_points(gh, gw, W, H); break;
        case Strategy::tspp_target:
          pts = tspp;
          extra = tspp_seconds;
          break;
        case Strategy::random_k: {
          Rng rng(derive_seed(base, 1));
          pts = detail::random_cells(static_cast<int>(tspp.count()), gh, gw, W, H, rng);
          break;
        }
        case Strategy::tspp_head:
          pts = sample_points(head_forward(scene.cost, *head).pred, derive_seed(base, 2), W, H);
          break;
      }
      cell.points.push_back(pts.count());
      cell.hits.push_back(detail::masks_hit(nonempty, pts));
      cell.seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count() + extra);
    }
  });

  BenchReport rep;
  rep.images = n;
  rep.repeats = cfg.repeats;
  for (std::size_t s = 0; s < S; ++s) {
    StrategyStats st;
    st.name = strategy_name(cfg.strategies[s]);
    double pts = 0.0, secs = 0.0;
    for (const auto& c : cells) {
      st.points.push_back(c.points[s]);
      pts += static_cast<double>(c.points[s]);
      secs += c.seconds[s];
      st.masks += c.masks;
      st.hits += c.hits[s];
    }
    st.mean_points = pts / static_cast<double>(cells.size());
    st.seconds_per_image = secs / static_cast<double>(cells.size());
    st.recall = st.masks == 0 ? 1.0 : static_cast<double>(st.hits) / static_cast<double>(st.masks);
    rep.strategies.push_back(std::move(st));
  }
  return rep;
}

struct AlphaRow {
  double alpha = 0.0;
  double mean_miou = 0.0;
  double mean_merged = 0.0;     // mean N_m
  std::size_t total_merged = 0;
  std::size_t total_proposals = 0;
};

struct AlphaSweepReport {
  std::vector<AlphaRow> rows;  // input order
  bool monotone = true;        // N_m non-decreasing in alpha on every scene
  std::vector<std::vector<std::size_t>> merged;  // [alpha][scene]
};

/// Pipeline over the suite for each alpha, with identical prompts and
/// proposals across alphas (the per-scene seed does not depend on alpha).
inline AlphaSweepReport alpha_sweep(const std::vector<Scene>& suite, const std::vector<double>& alphas,
                                    const TsppHeadParams& head, const PipelineConfig& base, unsigned threads = 1) {
  if (suite.empty()) throw Error("alpha_sweep: empty suite");
  for (double a : alphas)
    if (!(a >= 0 && a < 1)) throw Error("alpha_sweep: alpha values must lie in [0, 1)");
  AlphaSweepReport rep;
  for (double a : alphas) {
    auto cfg = base;
    cfg.smagg.alpha = a;
    cfg.use_smagg = true;
    const auto results = run_suite(suite, head, cfg, threads);
    AlphaRow row;
    row.alpha = a;
    std::vector<std::size_t> nm;
    for (const auto& r : results) {
      row.mean_miou += r.diag.miou;
      row.total_merged += r.diag.n_merged;
      row.total_proposals += r.diag.n_proposals;
      nm.push_back(r.diag.n_merged);
    }
    row.mean_miou /= static_cast<double>(results.size());
    row.mean_merged = static_cast<double>(row.total_merged) / static_cast<double>(results.size());
    rep.rows.push_back(row);
    rep.merged.push_back(std::move(nm));
  }
  std::vector<std::size_t> order(alphas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return alphas[a] < alphas[b]; });
  for (std::size_t j = 1; j < order.size(); ++j)
    for (std::size_t s = 0; s < suite.size(); ++s)
      if (rep.merged[order[j]][s] < rep.merged[order[j - 1]][s]) rep.monotone = false;
  return rep;
}

}  // namespace maskinject
