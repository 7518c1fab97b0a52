#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/geometry.hpp"
#include "maskinject/mask.hpp"
#include "maskinject/params.hpp"

namespace maskinject {

/// Dense D x h x w feature grid, channel-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int d, int h, int w)
      : channels(d), height(h), width(w), values(static_cast<std::size_t>(d) * h * w, 0.0) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double at(int c, int y, int x) const { return values[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double& at(int c, int y, int x) { return values[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// One pooled feature vector per mask, N_m x D.
struct MaskEmbeddings {
  int count = 0;
  int dim = 0;
  std::vector<double> values;
  std::vector<std::size_t> empty_rows;  // masks with no cell at the feature resolution

  double at(int k, int d) const { return values[static_cast<std::size_t>(k) * dim + d]; }
  std::span<const double> row(int k) const { return {values.data() + static_cast<std::size_t>(k) * dim, static_cast<std::size_t>(dim)}; }
};

namespace detail {

inline void check_masks_match(const FeatureMap& f, const MaskSet& masks, const char* who) {
  if (masks.width != f.width || masks.height != f.height)
    throw Error(std::string(who) + ": masks are " + std::to_string(masks.width) + "x" +
                std::to_string(masks.height) + " but features are " + std::to_string(f.width) + "x" +
                std::to_string(f.height));
}

}  // namespace detail

/// Row k is the mean feature vector over the cells of mask k. Masks with no
/// cell produce a zero row and are listed in `empty_rows`.
inline MaskEmbeddings mask_pool(const FeatureMap& f, const MaskSet& masks) {
  detail::check_masks_match(f, masks, "mask_pool");
  MaskEmbeddings e{static_cast<int>(masks.size()), f.channels,
                   std::vector<double>(masks.size() * f.channels, 0.0), {}};
  const std::size_t plane = f.plane();
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const std::size_t n = masks[k].area();
    if (n == 0) {
      e.empty_rows.push_back(k);
      continue;
    }
    for (int d = 0; d < f.channels; ++d) {
      double s = 0.0;
      for (std::size_t c = 0; c < plane; ++c)
        if (masks[k][c]) s += f.values[d * plane + c];
      e.values[k * f.channels + d] = s / static_cast<double>(n);
    }
  }
  return e;
}

/// f(c) plus the embedding of every mask containing c.
inline FeatureMap intra_mask_context(const FeatureMap& f, const MaskSet& masks, const MaskEmbeddings& emb) {
  detail::check_masks_match(f, masks, "intra_mask_context");
  if (emb.count != static_cast<int>(masks.size()) || (emb.count > 0 && emb.dim != f.channels))
    throw Error("intra_mask_context: embedding shape does not match masks/features");
  FeatureMap out = f;
  const std::size_t plane = f.plane();
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (std::size_t c = 0; c < plane; ++c)
      if (masks[k][c])
        for (int d = 0; d < f.channels; ++d) out.values[d * plane + c] += emb.at(static_cast<int>(k), d);
  return out;
}

/// Per cell: softmax(q . M^T / sqrt(D)) M. With no keys the result is zero.
inline FeatureMap cross_attention(const FeatureMap& query, const MaskEmbeddings& emb) {
  FeatureMap out(query.channels, query.height, query.width);
  if (emb.count == 0) return out;
  if (emb.dim != query.channels) throw Error("cross_attention: embedding dim does not match query channels");
  const int D = query.channels, N = emb.count;
  const std::size_t plane = query.plane();
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<double> a(N);
  for (std::size_t c = 0; c < plane; ++c) {
    double mx = -INFINITY;
    for (int k = 0; k < N; ++k) {
      double s = 0;
      for (int d = 0; d < D; ++d) s += query.values[d * plane + c] * emb.at(k, d);
      a[k] = s * scale;
      mx = std::max(mx, a[k]);
    }
    double z = 0;
    for (int k = 0; k < N; ++k) {
      a[k] = std::exp(a[k] - mx);
      z += a[k];
    }
    for (int d = 0; d < D; ++d) {
      double acc = 0;
      for (int k = 0; k < N; ++k) acc += a[k] * emb.at(k, d);
      out.values[d * plane + c] = acc / z;
    }
  }
  return out;
}

struct AttentionGrad {
  FeatureMap query;
  std::vector<double> emb;  // N_m x D
};

inline AttentionGrad cross_attention_backward(const FeatureMap& query, const MaskEmbeddings& emb,
                                              const FeatureMap& d_out) {
  AttentionGrad g{FeatureMap(query.channels, query.height, query.width),
                  std::vector<double>(emb.values.size(), 0.0)};
  if (emb.count == 0) return g;
  const int D = query.channels, N = emb.count;
  const std::size_t plane = query.plane();
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  std::vector<double> a(N), da(N);
  for (std::size_t c = 0; c < plane; ++c) {
    double mx = -INFINITY;
    for (int k = 0; k < N; ++k) {
      double s = 0;
      for (int d = 0; d < D; ++d) s += query.values[d * plane + c] * emb.at(k, d);
      a[k] = s * scale;
      mx = std::max(mx, a[k]);
    }
    double z = 0;
    for (int k = 0; k < N; ++k) {
      a[k] = std::exp(a[k] - mx);
      z += a[k];
    }
    double dot = 0;
    for (int k = 0; k < N; ++k) {
      a[k] /= z;
      double s = 0;
      for (int d = 0; d < D; ++d) s += d_out.values[d * plane + c] * emb.at(k, d);
      da[k] = s;
      dot += a[k] * s;
    }
    for (int k = 0; k < N; ++k) {
      const double ds = a[k] * (da[k] - dot) * scale;
      for (int d = 0; d < D; ++d) {
        g.query.values[d * plane + c] += ds * emb.at(k, d);
        g.emb[static_cast<std::size_t>(k) * D + d] +=
            a[k] * d_out.values[d * plane + c] + ds * query.values[d * plane + c];
      }
    }
  }
  return g;
}

/// Mask contextual representation: intra-mask context plus cross-attention
/// of that context over the pooled mask embeddings.
inline FeatureMap low_freq_inject(const FeatureMap& f, const MaskSet& masks) {
  const auto emb = mask_pool(f, masks);
  auto intra = intra_mask_context(f, masks, emb);
  const auto inter = cross_attention(intra, emb);
  for (std::size_t i = 0; i < intra.values.size(); ++i) intra.values[i] += inter.values[i];
  return intra;
}

/// Gradient of sum(d_out * low_freq_inject(f, masks)) with respect to f.
inline FeatureMap low_freq_backward(const FeatureMap& f, const MaskSet& masks, const FeatureMap& d_out) {
  const auto emb = mask_pool(f, masks);
  const auto intra = intra_mask_context(f, masks, emb);
  const auto att = cross_attention_backward(intra, emb, d_out);
  const int D = f.channels;
  const std::size_t plane = f.plane();

  FeatureMap d_intra = d_out;
  for (std::size_t i = 0; i < d_intra.values.size(); ++i) d_intra.values[i] += att.query.values[i];
  std::vector<double> d_emb = att.emb;
  for (std::size_t k = 0; k < masks.size(); ++k)
    for (std::size_t c = 0; c < plane; ++c)
      if (masks[k][c])
        for (int d = 0; d < D; ++d) d_emb[k * D + d] += d_intra.values[d * plane + c];

  FeatureMap df = d_intra;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const std::size_t n = masks[k].area();
    if (n == 0) continue;
    for (std::size_t c = 0; c < plane; ++c)
      if (masks[k][c])
        for (int d = 0; d < D; ++d) df.values[d * plane + c] += d_emb[k * D + d] / static_cast<double>(n);
  }
  return df;
}

// ---------------------------------------------------------------------------
// High-frequency injection

/// Fixed-size per-cell summary of a mask set, so learnable shapes do not
/// depend on the number of masks. Channels:
///   0: number of masks covering the cell
///   1: distance to the nearest mask boundary, capped at 3 cells, over 3
///   2..: presence bit for each tag < tag_cap (tag = class id, or mask index)
inline FeatureMap mask_summary(const MaskSet& masks, int tag_cap, std::span<const int> tags = {}) {
  const int w = masks.width, h = masks.height;
  FeatureMap out(2 + tag_cap, h, w);
  const std::size_t plane = out.plane();
  std::vector<std::uint8_t> boundary(plane, 0);
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const auto& m = masks[k];
    const int tag = tags.empty() ? static_cast<int>(k) : tags[k];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!m.get(x, y)) continue;
        const std::size_t c = static_cast<std::size_t>(y) * w + x;
        out.values[c] += 1.0;
        if (tag >= 0 && tag < tag_cap) out.values[(2 + tag) * plane + c] = 1.0;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int i = 0; i < 4; ++i)
          if (m.contains(nx[i], ny[i]) && !m.get(nx[i], ny[i])) boundary[c] = 1;
      }
  }
  constexpr double kCap = 3.0;
  const bool any = std::find(boundary.begin(), boundary.end(), std::uint8_t{1}) != boundary.end();
  std::vector<std::int64_t> d2;
  if (any) d2 = detail::squared_edt(w, h, boundary);
  for (std::size_t c = 0; c < plane; ++c)
    out.values[plane + c] = any ? std::min(std::sqrt(static_cast<double>(d2[c])), kCap) / kCap : 1.0;
  return out;
}

/// Weights of the high-frequency branch:
///   proj:  summary (S) -> D, tanh
///   mlp:   concat[f_h, proj] (2D) -> hidden (tanh) -> D
///   dw:    per-channel k x k kernel, zero padding, stride 1, no bias
///   gamma: per-channel scale on the branch, initialised to 1
struct HighFreqParams {
  enum Block : std::size_t { kProjW, kProjB, kW1, kB1, kW2, kB2, kKernel, kGamma };

  int channels = 0;
  int summary = 0;
  int hidden = 0;
  int kernel = 3;
  int tag_cap = 4;
  ParamVector weights;

  static HighFreqParams zeros(int channels, int tag_cap = 4, int hidden = 0, int kernel = 3) {
    if (channels < 1) throw Error("HighFreqParams: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw Error("HighFreqParams: kernel must be odd");
    HighFreqParams p;
    p.channels = channels;
    p.tag_cap = tag_cap;
    p.summary = 2 + tag_cap;
    p.hidden = hidden > 0 ? hidden : channels;
    p.kernel = kernel;
    const std::size_t D = channels, S = p.summary, H = p.hidden;
    p.weights.add("proj.w", D * S);
    p.weights.add("proj.b", D);
    p.weights.add("mlp.w1", H * 2 * D);
    p.weights.add("mlp.b1", H);
    p.weights.add("mlp.w2", D * H);
    p.weights.add("mlp.b2", D);
    p.weights.add("dw.kernel", D * kernel * kernel);
    p.weights.add("gamma", D);
    std::fill(p.weights.block(kGamma).begin(), p.weights.block(kGamma).end(), 1.0);
    return p;
  }

  /// Random weights. With `zero_output` the MLP output layer starts at zero,
  /// making the branch an exact identity until trained.
  static HighFreqParams init(int channels, std::uint64_t seed, bool zero_output = false, int tag_cap = 4) {
    auto p = zeros(channels, tag_cap);
    Rng rng(seed);
    const std::size_t D = channels, S = p.summary, H = p.hidden, kk = p.kernel * p.kernel;
    xavier_fill(p.weights.block(kProjW), S, D, rng);
    xavier_fill(p.weights.block(kW1), 2 * D, H, rng);
    if (!zero_output) xavier_fill(p.weights.block(kW2), H, D, rng);
    xavier_fill(p.weights.block(kKernel), kk, kk, rng);
    return p;
  }

  std::span<const double> operator[](Block b) const { return weights.block(b); }

  /// Rebuilds parameters from a flat vector laid out as `weights`.
  static HighFreqParams from_flat(int channels, std::span<const double> flat, int tag_cap = 4) {
    auto p = zeros(channels, tag_cap);
    if (flat.size() != p.weights.size())
      throw Error("HighFreqParams: expected " + std::to_string(p.weights.size()) + " values for " +
                  std::to_string(channels) + " channels, got " + std::to_string(flat.size()));
    p.weights.assign(flat);
    return p;
  }
};

struct HighFreqTrace {
  FeatureMap summary;  // S x h x w
  FeatureMap proj;     // D, post-tanh
  FeatureMap hidden;   // H, post-tanh
  FeatureMap mlp;      // D
  FeatureMap conv;     // D
  FeatureMap out;      // D
};

inline HighFreqTrace high_freq_trace(const FeatureMap& f_h, const MaskSet& masks, const HighFreqParams& p,
                                     std::span<const int> tags = {}) {
  detail::check_masks_match(f_h, masks, "high_freq_inject");
  if (f_h.channels != p.channels)
    throw Error("high_freq_inject: features have " + std::to_string(f_h.channels) + " channels, params expect " +
                std::to_string(p.channels));
  using B = HighFreqParams;
  const int D = p.channels, S = p.summary, H = p.hidden, ks = p.kernel, r = ks / 2;
  const int h = f_h.height, w = f_h.width;
  const std::size_t plane = f_h.plane();
  const auto pw = p[B::kProjW], pb = p[B::kProjB], w1 = p[B::kW1], b1 = p[B::kB1], w2 = p[B::kW2],
             b2 = p[B::kB2], kern = p[B::kKernel], gamma = p[B::kGamma];

  HighFreqTrace t{mask_summary(masks, p.tag_cap, tags), FeatureMap(D, h, w), FeatureMap(H, h, w),
                  FeatureMap(D, h, w), FeatureMap(D, h, w), f_h};
  std::vector<double> m(2 * D);
  for (std::size_t c = 0; c < plane; ++c) {
    for (int o = 0; o < D; ++o) {
      double a = pb[o];
      for (int i = 0; i < S; ++i) a += pw[o * S + i] * t.summary.values[i * plane + c];
      t.proj.values[o * plane + c] = std::tanh(a);
    }
    for (int i = 0; i < D; ++i) {
      m[i] = f_h.values[i * plane + c];
      m[D + i] = t.proj.values[i * plane + c];
    }
    for (int o = 0; o < H; ++o) {
      double a = b1[o];
      for (int i = 0; i < 2 * D; ++i) a += w1[o * 2 * D + i] * m[i];
      t.hidden.values[o * plane + c] = std::tanh(a);
    }
    for (int o = 0; o < D; ++o) {
      double a = b2[o];
      for (int i = 0; i < H; ++i) a += w2[o * H + i] * t.hidden.values[i * plane + c];
      t.mlp.values[o * plane + c] = a;
    }
  }
  for (int d = 0; d < D; ++d)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            acc += kern[(d * ks + (dy + r)) * ks + (dx + r)] * t.mlp.at(d, yy, xx);
          }
        t.conv.at(d, y, x) = acc;
        t.out.at(d, y, x) += gamma[d] * acc;
      }
  return t;
}

/// f_h + gamma * DWConv(MLP(concat[f_h, proj(summary(masks))])).
inline FeatureMap high_freq_inject(const FeatureMap& f_h, const MaskSet& masks, const HighFreqParams& p,
                                   std::span<const int> tags = {}) {
  return high_freq_trace(f_h, masks, p, tags).out;
}

struct HighFreqGrad {
  FeatureMap features;
  ParamVector params;
};

inline HighFreqGrad high_freq_backward(const FeatureMap& f_h, const MaskSet& masks, const HighFreqParams& p,
                                       const FeatureMap& d_out, std::span<const int> tags = {}) {
  using B = HighFreqParams;
  const auto t = high_freq_trace(f_h, masks, p, tags);
  const int D = p.channels, S = p.summary, H = p.hidden, ks = p.kernel, r = ks / 2;
  const int h = f_h.height, w = f_h.width;
  const std::size_t plane = f_h.plane();
  const auto pw = p[B::kProjW], w1 = p[B::kW1], w2 = p[B::kW2], kern = p[B::kKernel], gamma = p[B::kGamma];

  HighFreqGrad g{d_out, p.weights.zeros_like()};
  auto gpw = g.params.block(B::kProjW), gpb = g.params.block(B::kProjB), gw1 = g.params.block(B::kW1),
       gb1 = g.params.block(B::kB1), gw2 = g.params.block(B::kW2), gb2 = g.params.block(B::kB2),
       gk = g.params.block(B::kKernel), gg = g.params.block(B::kGamma);

  FeatureMap d_mlp(D, h, w);
  for (int d = 0; d < D; ++d)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double go = d_out.at(d, y, x);
        gg[d] += go * t.conv.at(d, y, x);
        const double dc = gamma[d] * go;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const std::size_t ki = (d * ks + (dy + r)) * ks + (dx + r);
            gk[ki] += dc * t.mlp.at(d, yy, xx);
            d_mlp.at(d, yy, xx) += dc * kern[ki];
          }
      }

  std::vector<double> m(2 * D), dm(2 * D), dh(H);
  for (std::size_t c = 0; c < plane; ++c) {
    for (int i = 0; i < D; ++i) {
      m[i] = f_h.values[i * plane + c];
      m[D + i] = t.proj.values[i * plane + c];
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    for (int o = 0; o < D; ++o) {
      const double go = d_mlp.values[o * plane + c];
      gb2[o] += go;
      for (int i = 0; i < H; ++i) {
        gw2[o * H + i] += go * t.hidden.values[i * plane + c];
        dh[i] += w2[o * H + i] * go;
      }
    }
    std::fill(dm.begin(), dm.end(), 0.0);
    for (int o = 0; o < H; ++o) {
      const double hv = t.hidden.values[o * plane + c];
      const double da = dh[o] * (1.0 - hv * hv);
      gb1[o] += da;
      for (int i = 0; i < 2 * D; ++i) {
        gw1[o * 2 * D + i] += da * m[i];
        dm[i] += w1[o * 2 * D + i] * da;
      }
    }
    for (int i = 0; i < D; ++i) g.features.values[i * plane + c] += dm[i];
    for (int o = 0; o < D; ++o) {
      const double pv = t.proj.values[o * plane + c];
      const double da = dm[D + o] * (1.0 - pv * pv);
      gpb[o] += da;
      for (int i = 0; i < S; ++i) gpw[o * S + i] += da * t.summary.values[i * plane + c];
    }
  }
  return g;
}

}  // namespace maskinject
