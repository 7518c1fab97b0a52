#pragma once

// Brute-force reference implementations for property tests. Each one is a
// direct evaluation of its definition and uses none of the fast-path
// helpers (only the plain data types).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "maskinject/dmi.hpp"
#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/smagg.hpp"
#include "maskinject/tspp.hpp"

namespace maskinject::oracle {

/// Squared distance from each pixel to the nearest pixel whose bit equals
/// `ref_value`, by exhaustive search.
inline std::vector<std::int64_t> oracle_edt(const BinaryMask& m, bool ref_value) {
  const int w = m.width(), h = m.height();
  std::vector<std::pair<int, int>> refs;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m.get(x, y) == ref_value) refs.emplace_back(x, y);
  if (refs.empty()) throw Error("oracle_edt: no reference pixel");
  std::vector<std::int64_t> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& [rx, ry] : refs) {
        const std::int64_t dx = x - rx, dy = y - ry;
        best = std::min(best, dx * dx + dy * dy);
      }
      out[static_cast<std::size_t>(y) * w + x] = best;
    }
  return out;
}

/// Squared distance from each mask pixel to the nearest non-mask pixel,
/// where the ring of pixels just outside the canvas also counts as
/// non-mask. -1 off the mask.
inline std::vector<std::int64_t> oracle_interior_edt(const BinaryMask& m) {
  const int w = m.width(), h = m.height();
  std::vector<std::pair<int, int>> outside;
  for (int y = -1; y <= h; ++y)
    for (int x = -1; x <= w; ++x) {
      const bool in_canvas = x >= 0 && y >= 0 && x < w && y < h;
      if (!in_canvas || !m.get(x, y)) outside.emplace_back(x, y);
    }
  std::vector<std::int64_t> out(static_cast<std::size_t>(w) * h, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.get(x, y)) continue;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& [ox, oy] : outside) {
        const std::int64_t dx = x - ox, dy = y - oy;
        best = std::min(best, dx * dx + dy * dy);
      }
      out[static_cast<std::size_t>(y) * w + x] = best;
    }
  return out;
}

/// Ridge of the interior distance: mask pixels not exceeded by any of their
/// 8 neighbours (non-mask and off-canvas neighbours count as 0).
inline BinaryMask oracle_skeleton(const BinaryMask& m) {
  const auto d = oracle_interior_edt(m);
  const int w = m.width(), h = m.height();
  auto at = [&](int x, int y) -> std::int64_t {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return std::max<std::int64_t>(d[static_cast<std::size_t>(y) * w + x], 0);
  };
  BinaryMask s(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.get(x, y)) continue;
      bool ridge = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (at(x + dx, y + dy) > at(x, y)) ridge = false;
      if (ridge) s.set(x, y);
    }
  return s;
}

/// Euclidean distance from each mask pixel to the nearest skeleton pixel;
/// NaN off the mask.
inline std::vector<double> oracle_skeleton_distance(const BinaryMask& m) {
  const auto s = oracle_skeleton(m);
  const int w = m.width(), h = m.height();
  std::vector<std::pair<int, int>> ridge;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (s.get(x, y)) ridge.emplace_back(x, y);
  std::vector<double> out(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::quiet_NaN());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.get(x, y)) continue;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (const auto& [rx, ry] : ridge) {
        const std::int64_t dx = x - rx, dy = y - ry;
        best = std::min(best, dx * dx + dy * dy);
      }
      out[static_cast<std::size_t>(y) * w + x] = std::sqrt(static_cast<double>(best));
    }
  return out;
}

/// Unclamped target mass per grid cell, evaluated mask by mask:
/// raw(c) = P_k * g(c) / sum_c' g(c') over the cells whose center pixel lies
/// in mask k, with g the Gaussian of the skeleton distance at bandwidth
/// max-distance / 3 and P_k = min(ceil(area / g_p), m_p).
inline std::vector<double> oracle_probability_target(const MaskSet& gt, const SamplerConfig& cfg) {
  std::vector<double> raw(static_cast<std::size_t>(cfg.grid_h) * cfg.grid_w, 0.0);
  for (const auto& m : gt.masks) {
    const int W = m.width(), H = m.height();
    bool any = false;
    for (int y = 0; y < H && !any; ++y)
      for (int x = 0; x < W && !any; ++x) any = m.get(x, y);
    if (!any) continue;
    const auto dist = oracle_skeleton_distance(m);
    double dmax = 0.0;
    std::size_t pixel_area = 0;
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (!std::isnan(dist[i])) {
        dmax = std::max(dmax, dist[i]);
        ++pixel_area;
      }
    const double sigma = dmax / 3.0;
    std::vector<std::size_t> cells;
    std::vector<double> g;
    for (int i = 0; i < cfg.grid_h; ++i)
      for (int j = 0; j < cfg.grid_w; ++j) {
        // Pixel under the cell center ((j + 1/2) W / grid_w, (i + 1/2) H / grid_h).
        const int px = static_cast<int>(std::floor((j + 0.5) * W / cfg.grid_w));
        const int py = static_cast<int>(std::floor((i + 0.5) * H / cfg.grid_h));
        if (!m.get(px, py)) continue;
        const double d = dist[static_cast<std::size_t>(py) * W + px];
        cells.push_back(static_cast<std::size_t>(i) * cfg.grid_w + j);
        g.push_back(sigma > 0 ? std::exp(-d * d / (2 * sigma * sigma)) : (d == 0 ? 1.0 : 0.0));
      }
    if (cells.empty()) continue;
    const double area = static_cast<double>(cfg.area_in_pixels ? pixel_area : cells.size());
    const double pk = std::min(std::ceil(area / cfg.g_p), static_cast<double>(cfg.m_p));
    double total = 0.0;
    for (double v : g) total += v;
    for (std::size_t c = 0; c < cells.size(); ++c) raw[cells[c]] = pk * g[c] / total;
  }
  return raw;
}

/// Exhaustive aggregation. Proposals are reduced to the class-mask grid by
/// block majority; score(i, k) = |s_i & t_k| / (|s_i| + eps); a proposal
/// joins the lowest-index class attaining its maximum score when that score
/// exceeds alpha. Merged masks come first in class order, then unmatched
/// proposals in input order.
inline AggregationResult oracle_aggregate(const MaskSet& sam, const MaskSet& text, double alpha, double eps = 1e-6) {
  const std::size_t n = sam.size(), K = text.size();
  std::vector<std::vector<double>> score(n, std::vector<double>(K, 0.0));
  if (n > 0 && K > 0) {
    const int f = sam.width / text.width;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint8_t> small(static_cast<std::size_t>(text.width) * text.height, 0);
      for (int y = 0; y < text.height; ++y)
        for (int x = 0; x < text.width; ++x) {
          int count = 0;
          for (int yy = y * f; yy < (y + 1) * f; ++yy)
            for (int xx = x * f; xx < (x + 1) * f; ++xx) count += sam[i].get(xx, yy) ? 1 : 0;
          small[static_cast<std::size_t>(y) * text.width + x] = 2 * count >= f * f;
        }
      double area = 0.0;
      for (auto b : small) area += b;
      for (std::size_t k = 0; k < K; ++k) {
        double inter = 0.0;
        for (std::size_t c = 0; c < small.size(); ++c) inter += (small[c] && text[k][c]) ? 1.0 : 0.0;
        score[i][k] = inter / (area + eps);
      }
    }
  }
  std::vector<std::optional<std::size_t>> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (std::size_t k = 0; k < K; ++k) best = std::max(best, score[i][k]);
    if (!(best > alpha)) continue;
    for (std::size_t k = 0; k < K; ++k)
      if (score[i][k] == best) {
        cls[i] = k;
        break;
      }
  }
  AggregationResult out;
  out.masks = MaskSet(sam.width, sam.height, sam.disjoint);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> members;
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(sam.width) * sam.height, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (cls[i] != k) continue;
      members.push_back(i);
      for (std::size_t p = 0; p < bits.size(); ++p) bits[p] = bits[p] | (sam[i][p] ? 1 : 0);
    }
    if (members.empty()) continue;
    out.masks.masks.emplace_back(sam.width, sam.height, std::move(bits));
    out.class_of.emplace_back(static_cast<int>(k));
    out.provenance.push_back(members);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i]) continue;
    out.masks.masks.push_back(sam[i]);
    out.class_of.emplace_back(std::nullopt);
    out.provenance.push_back({i});
  }
  return out;
}

/// Depthwise 2D correlation, zero padding, stride 1, no bias. `kernel` is
/// channels x k x k.
inline FeatureMap oracle_conv(const FeatureMap& in, std::span<const double> kernel, int k) {
  FeatureMap out(in.channels, in.height, in.width);
  const int r = k / 2;
  for (int c = 0; c < in.channels; ++c)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        double s = 0.0;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            const int yy = y + u - r, xx = x + v - r;
            if (yy < 0 || xx < 0 || yy >= in.height || xx >= in.width) continue;
            s += kernel[static_cast<std::size_t>(c) * k * k + u * k + v] * in.at(c, yy, xx);
          }
        out.at(c, y, x) = s;
      }
  return out;
}

/// Mean feature vector under each mask (zero row for an empty mask).
inline std::vector<std::vector<double>> oracle_mask_pool(const FeatureMap& f, const MaskSet& masks) {
  std::vector<std::vector<double>> rows;
  for (const auto& m : masks.masks) {
    std::vector<double> row(f.channels, 0.0);
    double n = 0.0;
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x)
        if (m.get(x, y)) {
          n += 1.0;
          for (int c = 0; c < f.channels; ++c) row[c] += f.at(c, y, x);
        }
    if (n > 0)
      for (auto& v : row) v /= n;
    rows.push_back(row);
  }
  return rows;
}

/// f(x, y) plus the pooled vector of every mask containing (x, y).
inline FeatureMap oracle_intra(const FeatureMap& f, const MaskSet& masks) {
  const auto rows = oracle_mask_pool(f, masks);
  FeatureMap out = f;
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x)
        if (masks[k].get(x, y))
          for (int c = 0; c < f.channels; ++c) out.at(c, y, x) += rows[k][c];
  return out;
}

/// softmax(q M^T / sqrt(D)) M per cell; zero when there are no rows.
inline FeatureMap oracle_cross_attention(const FeatureMap& q, const std::vector<std::vector<double>>& rows) {
  FeatureMap out(q.channels, q.height, q.width);
  if (rows.empty()) return out;
  const double scale = std::sqrt(static_cast<double>(q.channels));
  for (int y = 0; y < q.height; ++y)
    for (int x = 0; x < q.width; ++x) {
      std::vector<double> logits;
      for (const auto& r : rows) {
        double dot = 0.0;
        for (int c = 0; c < q.channels; ++c) dot += q.at(c, y, x) * r[c];
        logits.push_back(dot / scale);
      }
      const double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto& l : logits) z += (l = std::exp(l - mx));
      for (int c = 0; c < q.channels; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < rows.size(); ++k) s += logits[k] / z * rows[k][c];
        out.at(c, y, x) = s;
      }
    }
  return out;
}

inline FeatureMap oracle_low_freq(const FeatureMap& f, const MaskSet& masks) {
  auto intra = oracle_intra(f, masks);
  const auto inter = oracle_cross_attention(intra, oracle_mask_pool(f, masks));
  for (int c = 0; c < f.channels; ++c)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) intra.at(c, y, x) += inter.at(c, y, x);
  return intra;
}

/// High-frequency branch from its definition, given the per-cell mask
/// summary: f + gamma * conv(W2 tanh(W1 [f; tanh(P s + p)] + b1) + b2).
inline FeatureMap oracle_high_freq(const FeatureMap& f, const FeatureMap& summary, const HighFreqParams& p) {
  using B = HighFreqParams;
  const int D = p.channels, S = p.summary, Hd = p.hidden;
  const auto pw = p[B::kProjW], pb = p[B::kProjB], w1 = p[B::kW1], b1 = p[B::kB1], w2 = p[B::kW2],
             b2 = p[B::kB2], gamma = p[B::kGamma];
  FeatureMap mlp(D, f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      std::vector<double> in(2 * D);
      for (int d = 0; d < D; ++d) in[d] = f.at(d, y, x);
      for (int d = 0; d < D; ++d) {
        double a = pb[d];
        for (int s = 0; s < S; ++s) a += pw[static_cast<std::size_t>(d) * S + s] * summary.at(s, y, x);
        in[D + d] = std::tanh(a);
      }
      std::vector<double> hid(Hd);
      for (int o = 0; o < Hd; ++o) {
        double a = b1[o];
        for (int i = 0; i < 2 * D; ++i) a += w1[static_cast<std::size_t>(o) * 2 * D + i] * in[i];
        hid[o] = std::tanh(a);
      }
      for (int d = 0; d < D; ++d) {
        double a = b2[d];
        for (int o = 0; o < Hd; ++o) a += w2[static_cast<std::size_t>(d) * Hd + o] * hid[o];
        mlp.at(d, y, x) = a;
      }
    }
  const auto conv = oracle_conv(mlp, p[B::kKernel], p.kernel);
  FeatureMap out = f;
  for (int d = 0; d < D; ++d)
    for (int y = 0; y < f.height; ++y)
      for (int x = 0; x < f.width; ++x) out.at(d, y, x) += gamma[d] * conv.at(d, y, x);
  return out;
}

}  // namespace maskinject::oracle
