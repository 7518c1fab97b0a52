#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"

namespace maskinject {

/// Overlap of proposal i with class mask j, normalised by the proposal's
/// area: |sam_i & text_j| / (|sam_i| + eps).
struct MatchMatrix {
  std::size_t n_sam = 0;
  std::size_t n_text = 0;
  std::vector<double> scores;

  double at(std::size_t i, std::size_t j) const { return scores[i * n_text + j]; }
};

struct AggregationResult {
  MaskSet masks;
  std::vector<std::optional<int>> class_of;         // empty for pass-through masks
  std::vector<std::vector<std::size_t>> provenance;  // source rows of the proposal set
};

/// Where proposals and class masks are compared.
enum class MatchResolution {
  text_grid,  // downsample proposals (majority rule) to the class-mask grid
  full,       // upsample class masks (nearest) to the proposal grid
};

struct SmaggConfig {
  double alpha = 0.50;
  double eps = 1e-6;
  MatchResolution resolution = MatchResolution::text_grid;
};

namespace detail {

inline int alignment_factor(const MaskSet& sam, const MaskSet& text) {
  if (sam.width == text.width && sam.height == text.height) return 1;
  if (text.width == 0 || text.height == 0 || sam.width % text.width != 0 || sam.height % text.height != 0 ||
      sam.width / text.width != sam.height / text.height)
    throw Error("matching_scores: cannot align " + std::to_string(sam.width) + "x" + std::to_string(sam.height) +
                " proposals with " + std::to_string(text.width) + "x" + std::to_string(text.height) +
                " class masks");
  return sam.width / text.width;
}

}  // namespace detail

inline MatchMatrix matching_scores(const MaskSet& sam, const MaskSet& text, double eps = 1e-6,
                                   MatchResolution resolution = MatchResolution::text_grid) {
  if (!(eps > 0)) throw Error("matching_scores: eps must be positive");
  MatchMatrix out{sam.size(), text.size(), std::vector<double>(sam.size() * text.size(), 0.0)};
  if (sam.empty() || text.empty()) return out;
  const int factor = detail::alignment_factor(sam, text);

  std::vector<BinaryMask> rows, cols;
  if (resolution == MatchResolution::text_grid || factor == 1) {
    for (const auto& m : sam.masks) rows.push_back(factor == 1 ? m : downsample_mask(m, factor));
    cols = text.masks;
  } else {
    rows = sam.masks;
    for (const auto& m : text.masks) cols.push_back(upsample_mask(m, factor));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double denom = static_cast<double>(rows[i].area()) + eps;
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.scores[i * out.n_text + j] = static_cast<double>(intersect_count(rows[i], cols[j])) / denom;
  }
  return out;
}

/// Row i joins class k = argmax_k score(i, k) (lowest k on ties) when that
/// score exceeds alpha. Each class with at least one member yields the
/// union of its members' full-resolution proposals. Output order: merged
/// classes in ascending class order, then unmatched proposals unchanged in
/// input order.
inline AggregationResult aggregate_from_scores(const MaskSet& sam, const MatchMatrix& scores, double alpha) {
  if (!(alpha >= 0 && alpha < 1)) throw Error("aggregate: alpha must lie in [0, 1)");
  std::vector<int> assigned(sam.size(), -1);
  for (std::size_t i = 0; i < scores.n_sam; ++i) {
    int best = -1;
    for (std::size_t k = 0; k < scores.n_text; ++k) {
      const double s = scores.at(i, k);
      if (s > alpha && (best < 0 || s > scores.at(i, static_cast<std::size_t>(best)))) best = static_cast<int>(k);
    }
    assigned[i] = best;
  }

  AggregationResult out;
  out.masks = MaskSet(sam.width, sam.height, sam.disjoint);
  for (std::size_t k = 0; k < scores.n_text; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < sam.size(); ++i)
      if (assigned[i] == static_cast<int>(k)) members.push_back(i);
    if (members.empty()) continue;
    BinaryMask merged(sam.width, sam.height);
    for (auto i : members)
      for (std::size_t p = 0; p < merged.size(); ++p)
        if (sam[i][p]) merged.set_index(p);
    out.masks.push_back(std::move(merged));
    out.class_of.emplace_back(static_cast<int>(k));
    out.provenance.push_back(std::move(members));
  }
  for (std::size_t i = 0; i < sam.size(); ++i) {
    if (assigned[i] >= 0) continue;
    out.masks.push_back(sam[i]);
    out.class_of.emplace_back(std::nullopt);
    out.provenance.push_back({i});
  }
  return out;
}

inline AggregationResult aggregate(const MaskSet& sam, const MaskSet& text, const SmaggConfig& cfg = {}) {
  return aggregate_from_scores(sam, matching_scores(sam, text, cfg.eps, cfg.resolution), cfg.alpha);
}

inline AggregationResult aggregate(const MaskSet& sam, const MaskSet& text, double alpha, double eps = 1e-6) {
  return aggregate(sam, text, SmaggConfig{alpha, eps, MatchResolution::text_grid});
}

/// Every proposal emitted as-is; the "aggregation disabled" path.
inline AggregationResult passthrough(const MaskSet& sam) {
  AggregationResult out;
  out.masks = sam;
  for (std::size_t i = 0; i < sam.size(); ++i) {
    out.class_of.emplace_back(std::nullopt);
    out.provenance.push_back({i});
  }
  return out;
}

}  // namespace maskinject
