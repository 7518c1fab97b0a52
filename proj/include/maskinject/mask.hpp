#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskinject/error.hpp"

namespace maskinject {

/// Row-major binary bitmap. One byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height)
      : width_(checked_dim(width)), height_(checked_dim(height)),
        bits_(static_cast<std::size_t>(width) * height, 0) {}
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
      : width_(checked_dim(width)), height_(checked_dim(height)), bits_(std::move(bits)) {
    if (bits_.size() != static_cast<std::size_t>(width_) * height_)
      throw Error("BinaryMask: bit count does not match width*height");
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool get(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value = true) { bits_[index(x, y)] = value ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set_index(std::size_t i, bool value = true) { bits_[i] = value ? 1 : 0; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t area() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const { return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end(); }

  bool same_shape(const BinaryMask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  static int checked_dim(int v) {
    if (v < 0) throw Error("BinaryMask: negative dimension");
    return v;
  }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Ordered collection of same-sized masks. Order is insertion order and is
/// what downstream row/column indices refer to.
struct MaskSet {
  int width = 0;
  int height = 0;
  std::vector<BinaryMask> masks;
  bool disjoint = false;

  MaskSet() = default;
  MaskSet(int w, int h, bool is_disjoint = false) : width(w), height(h), disjoint(is_disjoint) {}

  std::size_t size() const { return masks.size(); }
  bool empty() const { return masks.empty(); }
  const BinaryMask& operator[](std::size_t i) const { return masks[i]; }

  void push_back(BinaryMask m) {
    if (m.width() != width || m.height() != height)
      throw Error("MaskSet: member mask has mismatched dimensions");
    masks.push_back(std::move(m));
  }

  /// Per-pixel count of members covering that pixel.
  std::vector<int> coverage() const {
    std::vector<int> cover(static_cast<std::size_t>(width) * height, 0);
    for (const auto& m : masks)
      for (std::size_t i = 0; i < cover.size(); ++i) cover[i] += m[i] ? 1 : 0;
    return cover;
  }

  bool verify_disjoint() const {
    const auto cover = coverage();
    return std::all_of(cover.begin(), cover.end(), [](int c) { return c <= 1; });
  }
};

/// Row-major label image; 0 is background.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {
    if (w < 0 || h < 0) throw Error("LabelMap: negative dimension");
  }
  LabelMap(int w, int h, std::vector<std::uint32_t> values)
      : width(w), height(h), labels(std::move(values)) {
    if (labels.size() != static_cast<std::size_t>(w) * h)
      throw Error("LabelMap: label count does not match width*height");
  }

  std::uint32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

  std::uint32_t max_label() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Distinct nonzero labels in ascending order.
inline std::vector<std::uint32_t> labels_present(const LabelMap& lm) {
  std::vector<std::uint32_t> ids(lm.labels);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (!ids.empty() && ids.front() == 0) ids.erase(ids.begin());
  return ids;
}

/// One mask per distinct nonzero label, ascending label order.
inline MaskSet masks_from_labelmap(const LabelMap& lm) {
  const auto ids = labels_present(lm);
  MaskSet out(lm.width, lm.height, true);
  std::map<std::uint32_t, std::size_t> slot;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    slot[ids[i]] = i;
    out.masks.emplace_back(lm.width, lm.height);
  }
  for (std::size_t p = 0; p < lm.labels.size(); ++p)
    if (lm.labels[p] != 0) out.masks[slot[lm.labels[p]]].set_index(p);
  return out;
}

/// Mask k holds label k+1, for k in [0, classes). Absent labels give empty
/// masks so indices stay aligned with class ids.
inline MaskSet class_masks(const LabelMap& lm, int classes) {
  MaskSet out(lm.width, lm.height, true);
  for (int k = 0; k < classes; ++k) out.masks.emplace_back(lm.width, lm.height);
  for (std::size_t p = 0; p < lm.labels.size(); ++p) {
    const auto l = lm.labels[p];
    if (l != 0 && l <= static_cast<std::uint32_t>(classes)) out.masks[l - 1].set_index(p);
  }
  return out;
}

/// Pixel of mask i gets label i+1; later masks win on overlap.
inline LabelMap labelmap_from_masks(const MaskSet& ms) {
  LabelMap lm(ms.width, ms.height);
  for (std::size_t i = 0; i < ms.size(); ++i)
    for (std::size_t p = 0; p < lm.labels.size(); ++p)
      if (ms[i][p]) lm.labels[p] = static_cast<std::uint32_t>(i + 1);
  return lm;
}

enum class Connectivity { four = 4, eight = 8 };

/// Components ordered by their first pixel in raster order.
inline MaskSet connected_components(const BinaryMask& m, Connectivity conn = Connectivity::eight) {
  const int w = m.width(), h = m.height();
  MaskSet out(w, h, true);
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto start = static_cast<std::size_t>(y) * w + x;
      if (!m[start] || seen[start]) continue;
      BinaryMask comp(w, h);
      stack.assign(1, {x, y});
      seen[start] = 1;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        comp.set(cx, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (conn == Connectivity::four && dx != 0 && dy != 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (!m.contains(nx, ny)) continue;
            const auto ni = static_cast<std::size_t>(ny) * w + nx;
            if (m[ni] && !seen[ni]) {
              seen[ni] = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      out.masks.push_back(std::move(comp));
    }
  }
  return out;
}

inline std::size_t intersect_count(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw Error("intersect_count: dimension mismatch");
  const auto ab = a.bits(), bb = b.bits();
  std::size_t n = 0;
  for (std::size_t i = 0; i < ab.size(); ++i) n += ab[i] & bb[i];
  return n;
}

/// Pixel-wise OR. An empty list yields an all-zero mask of the given size.
inline BinaryMask union_all(std::span<const BinaryMask> masks, int width, int height) {
  BinaryMask out(width, height);
  for (const auto& m : masks) {
    if (m.width() != width || m.height() != height) throw Error("union_all: dimension mismatch");
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i]) out.set_index(i);
  }
  return out;
}

inline BinaryMask union_all(const MaskSet& ms) { return union_all(ms.masks, ms.width, ms.height); }

/// Block majority vote; a block with at least half its pixels set maps to 1.
inline BinaryMask downsample_mask(const BinaryMask& m, int factor) {
  if (factor < 1) throw Error("downsample_mask: factor must be >= 1");
  if (m.width() % factor != 0 || m.height() % factor != 0)
    throw Error("downsample_mask: factor " + std::to_string(factor) + " does not divide " +
                std::to_string(m.width()) + "x" + std::to_string(m.height()));
  const int w = m.width() / factor, h = m.height() / factor;
  const long block = static_cast<long>(factor) * factor;
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      long count = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) count += m.get(x * factor + dx, y * factor + dy);
      if (2 * count >= block) out.set(x, y);
    }
  }
  return out;
}

inline BinaryMask upsample_mask(const BinaryMask& m, int factor) {
  if (factor < 1) throw Error("upsample_mask: factor must be >= 1");
  BinaryMask out(m.width() * factor, m.height() * factor);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (m.get(x / factor, y / factor)) out.set(x, y);
  return out;
}

inline MaskSet downsample_masks(const MaskSet& ms, int factor) {
  MaskSet out(ms.width / factor, ms.height / factor, false);
  if (ms.width % factor != 0 || ms.height % factor != 0)
    throw Error("downsample_masks: factor does not divide mask dimensions");
  for (const auto& m : ms.masks) out.masks.push_back(downsample_mask(m, factor));
  out.disjoint = ms.disjoint && out.verify_disjoint();
  return out;
}

}  // namespace maskinject
