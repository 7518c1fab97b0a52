#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "maskinject/error.hpp"
#include "maskinject/mask.hpp"

namespace maskinject {

/// Per-pixel distances in pixel units. Cells outside the defined support
/// hold NaN.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  bool squared = false;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

enum class Reference { set_pixels, unset_pixels };

namespace detail {

/// Exact squared EDT on an integer lattice (separable lower-envelope
/// method). `is_ref` marks reference pixels; at least one must exist.
inline std::vector<std::int64_t> squared_edt(int w, int h, std::span<const std::uint8_t> is_ref) {
  if (std::find(is_ref.begin(), is_ref.end(), std::uint8_t{1}) == is_ref.end())
    throw Error("euclidean_distance_transform: no reference pixel");

  constexpr std::int64_t kNone = -1;
  // Column pass: distance to nearest reference in the same column.
  std::vector<std::int64_t> col(static_cast<std::size_t>(w) * h, kNone);
  for (int x = 0; x < w; ++x) {
    std::int64_t last = kNone;
    for (int y = 0; y < h; ++y) {
      if (is_ref[static_cast<std::size_t>(y) * w + x]) last = y;
      if (last != kNone) col[static_cast<std::size_t>(y) * w + x] = y - last;
    }
    last = kNone;
    for (int y = h - 1; y >= 0; --y) {
      if (is_ref[static_cast<std::size_t>(y) * w + x]) last = y;
      if (last != kNone) {
        auto& c = col[static_cast<std::size_t>(y) * w + x];
        const std::int64_t d = last - y;
        if (c == kNone || d < c) c = d;
      }
    }
  }

  // Row pass: lower envelope of parabolas rooted at columns with a finite
  // column distance.
  std::vector<std::int64_t> out(static_cast<std::size_t>(w) * h);
  std::vector<int> sites(w);
  std::vector<std::int64_t> f(w);
  std::vector<int> v(w);
  std::vector<double> z(w + 1);
  for (int y = 0; y < h; ++y) {
    int n = 0;
    for (int x = 0; x < w; ++x) {
      const auto c = col[static_cast<std::size_t>(y) * w + x];
      if (c != kNone) {
        sites[n] = x;
        f[n] = c * c;
        ++n;
      }
    }
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
      while (true) {
        const std::int64_t qa = sites[q], va = sites[v[k]];
        const double s = static_cast<double>((f[q] + qa * qa) - (f[v[k]] + va * va)) /
                         static_cast<double>(2 * (qa - va));
        if (s <= z[k]) {
          --k;
          continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
        break;
      }
    }
    k = 0;
    for (int x = 0; x < w; ++x) {
      while (z[k + 1] < x) ++k;
      const std::int64_t dx = x - sites[v[k]];
      out[static_cast<std::size_t>(y) * w + x] = dx * dx + f[v[k]];
    }
  }
  return out;
}

struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  bool empty() const { return x1 < x0; }
};

inline Box bounding_box(const BinaryMask& m) {
  Box b{m.width(), m.height(), -1, -1};
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.get(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
  return b;
}

/// Squared interior distance (to the nearest pixel outside the mask, where
/// everything beyond the canvas counts as outside) over the bounding box
/// grown by one pixel on each side. Returns the padded window.
struct InteriorEdt {
  Box window;
  int w = 0, h = 0;
  std::vector<std::int64_t> dist2;
  std::int64_t at(int x, int y) const {
    return dist2[static_cast<std::size_t>(y - window.y0) * w + (x - window.x0)];
  }
};

inline InteriorEdt interior_edt(const BinaryMask& m, const Box& bb) {
  InteriorEdt r;
  r.window = {bb.x0 - 1, bb.y0 - 1, bb.x1 + 1, bb.y1 + 1};
  r.w = r.window.x1 - r.window.x0 + 1;
  r.h = r.window.y1 - r.window.y0 + 1;
  std::vector<std::uint8_t> ref(static_cast<std::size_t>(r.w) * r.h, 1);
  for (int y = bb.y0; y <= bb.y1; ++y)
    for (int x = bb.x0; x <= bb.x1; ++x)
      if (m.get(x, y)) ref[static_cast<std::size_t>(y - r.window.y0) * r.w + (x - r.window.x0)] = 0;
  r.dist2 = squared_edt(r.w, r.h, ref);
  return r;
}

}  // namespace detail

/// Exact Euclidean distance from every pixel to the nearest reference pixel.
/// The squared variant is computed in integer arithmetic.
inline DistanceField euclidean_distance_transform(const BinaryMask& m, Reference reference,
                                                  bool squared = false) {
  std::vector<std::uint8_t> ref(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    ref[i] = (reference == Reference::set_pixels) == m[i] ? 1 : 0;
  const auto d2 = detail::squared_edt(m.width(), m.height(), ref);
  DistanceField out{m.width(), m.height(), std::vector<double>(d2.size()), squared};
  for (std::size_t i = 0; i < d2.size(); ++i)
    out.values[i] = squared ? static_cast<double>(d2[i]) : std::sqrt(static_cast<double>(d2[i]));
  return out;
}

/// Ridge pixels of the interior distance transform: mask pixels whose
/// interior distance is >= that of all 8 neighbours (pixels outside the
/// mask or the canvas count as distance 0).
inline BinaryMask medial_skeleton(const BinaryMask& m) {
  const auto bb = detail::bounding_box(m);
  if (bb.empty()) throw Error("medial_skeleton: empty mask");
  const auto edt = detail::interior_edt(m, bb);
  BinaryMask skel(m.width(), m.height());
  for (int y = bb.y0; y <= bb.y1; ++y) {
    for (int x = bb.x0; x <= bb.x1; ++x) {
      if (!m.get(x, y)) continue;
      const auto d = edt.at(x, y);
      bool ridge = true;
      for (int dy = -1; dy <= 1 && ridge; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (edt.at(x + dx, y + dy) > d) {
            ridge = false;
            break;
          }
      if (ridge) skel.set(x, y);
    }
  }
  return skel;
}

/// Distance from each mask pixel to the nearest skeleton pixel. Pixels
/// outside the mask are NaN.
inline DistanceField skeleton_distance_field(const BinaryMask& m) {
  const auto bb = detail::bounding_box(m);
  if (bb.empty()) throw Error("skeleton_distance_field: empty mask");
  const auto skel = medial_skeleton(m);
  const int w = bb.x1 - bb.x0 + 1, h = bb.y1 - bb.y0 + 1;
  std::vector<std::uint8_t> ref(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ref[static_cast<std::size_t>(y) * w + x] = skel.get(bb.x0 + x, bb.y0 + y);
  const auto d2 = detail::squared_edt(w, h, ref);

  DistanceField out{m.width(), m.height(),
                    std::vector<double>(m.size(), std::numeric_limits<double>::quiet_NaN()), false};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m.get(bb.x0 + x, bb.y0 + y))
        out.values[static_cast<std::size_t>(bb.y0 + y) * m.width() + bb.x0 + x] =
            std::sqrt(static_cast<double>(d2[static_cast<std::size_t>(y) * w + x]));
  return out;
}

/// Max skeleton distance over the mask, divided by 3.
inline double bandwidth(const DistanceField& skeleton_distance, const BinaryMask& m) {
  double best = -1.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) best = std::max(best, skeleton_distance.values[i]);
  if (best < 0) throw Error("bandwidth: empty mask");
  return best / 3.0;
}

inline double bandwidth(const BinaryMask& m) { return bandwidth(skeleton_distance_field(m), m); }

/// exp(-d^2 / 2 sigma^2), with the sigma = 0 limit taken as the indicator
/// of d = 0.
inline double skeleton_gaussian(double d, double sigma) {
  if (sigma == 0.0) return d == 0.0 ? 1.0 : 0.0;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

}  // namespace maskinject
