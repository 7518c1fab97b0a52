#include <gtest/gtest.h>

#include <algorithm>

#include "maskinject/mask.hpp"
#include "maskinject/random.hpp"

using namespace maskinject;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
  const int h = static_cast<int>(rows.size()), w = static_cast<int>(rows[0].size());
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (rows[y][x] == '#') m.set(x, y);
  return m;
}

BinaryMask random_mask(int w, int h, double density, Rng& rng) {
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_index(i, rng.uniform() < density);
  return m;
}

}  // namespace

TEST(BinaryMask, AreaAndEmpty) {
  BinaryMask m(4, 3);
  EXPECT_TRUE(m.empty());
  EXPECT_EQ(m.area(), 0u);
  m.set(1, 2);
  m.set(3, 0);
  EXPECT_FALSE(m.empty());
  EXPECT_EQ(m.area(), 2u);
  EXPECT_TRUE(m.get(1, 2));
  EXPECT_FALSE(m.get(0, 0));
}

TEST(BinaryMask, RejectsBadDimensions) {
  EXPECT_THROW(BinaryMask(-1, 3), Error);
  EXPECT_THROW(BinaryMask(2, 2, std::vector<std::uint8_t>(3)), Error);
}

TEST(BinaryMask, NormalisesBits) {
  BinaryMask m(2, 1, {0, 7});
  EXPECT_EQ(m.bits()[1], 1);
}

TEST(MaskSet, PushBackChecksDimensions) {
  MaskSet ms(4, 4);
  EXPECT_THROW(ms.push_back(BinaryMask(3, 4)), Error);
  ms.push_back(BinaryMask(4, 4));
  EXPECT_EQ(ms.size(), 1u);
}

TEST(MaskSet, DisjointAndCoverage) {
  MaskSet ms(3, 1);
  ms.push_back(from_rows({"##."}));
  ms.push_back(from_rows({".##"}));
  EXPECT_FALSE(ms.verify_disjoint());
  const auto c = ms.coverage();
  EXPECT_EQ(c, (std::vector<int>{1, 2, 1}));
}

TEST(LabelMap, MasksFromLabelsAscending) {
  LabelMap lm(3, 2, {0, 5, 5, 2, 0, 2});
  const auto ms = masks_from_labelmap(lm);
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_TRUE(ms.disjoint);
  EXPECT_EQ(ms[0], from_rows({"...", "#.#"}));
  EXPECT_EQ(ms[1], from_rows({".##", "..."}));
  EXPECT_EQ(labelmap_from_masks(ms), LabelMap(3, 2, {0, 2, 2, 1, 0, 1}));
}

TEST(LabelMap, ClassMasksKeepEmptyClasses) {
  LabelMap lm(2, 1, {3, 0});
  const auto ms = class_masks(lm, 4);
  ASSERT_EQ(ms.size(), 4u);
  EXPECT_TRUE(ms[0].empty());
  EXPECT_TRUE(ms[2].get(0, 0));
  EXPECT_TRUE(ms[3].empty());
}

TEST(LabelMap, RoundTripThroughMasks) {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    LabelMap lm(9, 7);
    for (auto& l : lm.labels) l = static_cast<std::uint32_t>(rng.uniform_int(0, 5));
    const auto ms = masks_from_labelmap(lm);
    // Labels get renumbered densely; the partition is preserved.
    const auto back = labelmap_from_masks(ms);
    for (std::size_t i = 0; i < lm.labels.size(); ++i)
      for (std::size_t j = 0; j < lm.labels.size(); ++j)
        EXPECT_EQ(lm.labels[i] == lm.labels[j], back.labels[i] == back.labels[j]);
  }
}

TEST(ConnectedComponents, FourVersusEight) {
  const auto m = from_rows({"#..", ".#.", "..#"});
  EXPECT_EQ(connected_components(m, Connectivity::eight).size(), 1u);
  EXPECT_EQ(connected_components(m, Connectivity::four).size(), 3u);
}

TEST(ConnectedComponents, PartitionTheMask) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    const auto m = random_mask(12, 10, 0.45, rng);
    for (auto conn : {Connectivity::four, Connectivity::eight}) {
      const auto cc = connected_components(m, conn);
      EXPECT_TRUE(cc.verify_disjoint());
      EXPECT_EQ(union_all(cc), m);
      for (const auto& c : cc.masks) EXPECT_FALSE(c.empty());
    }
  }
}

TEST(MaskOps, IntersectAndUnion) {
  const auto a = from_rows({"##.", "..."});
  const auto b = from_rows({".##", ".#."});
  EXPECT_EQ(intersect_count(a, b), 1u);
  EXPECT_THROW(intersect_count(a, BinaryMask(2, 2)), Error);
  const std::vector<BinaryMask> v{a, b};
  EXPECT_EQ(union_all(v, 3, 2), from_rows({"###", ".#."}));
}

TEST(MaskOps, DownsampleMajority) {
  const auto m = from_rows({"##..", "#...", "....", "...#"});
  EXPECT_EQ(downsample_mask(m, 2), from_rows({"#.", ".."}));
  // Exactly half set counts as set.
  const auto half = from_rows({"##", ".."});
  EXPECT_EQ(downsample_mask(half, 2), from_rows({"#"}));
  EXPECT_THROW(downsample_mask(m, 3), Error);
}

TEST(MaskOps, UpsampleThenDownsampleIsIdentity) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_mask(5, 4, 0.5, rng);
    EXPECT_EQ(downsample_mask(upsample_mask(m, 3), 3), m);
  }
}

TEST(LabelMap, EmptyMapHasNoMasks) {
  EXPECT_EQ(masks_from_labelmap(LabelMap(4, 4)).size(), 0u);
}

TEST(LabelMap, MatchesNaivePixelScan) {
  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    LabelMap lm(16, 16);
    for (auto& l : lm.labels) l = static_cast<std::uint32_t>(rng.uniform_int(0, 5));
    const auto ms = masks_from_labelmap(lm);
    std::vector<std::uint32_t> ids;
    for (std::uint32_t id = 1; id <= 5; ++id)
      if (std::find(lm.labels.begin(), lm.labels.end(), id) != lm.labels.end()) ids.push_back(id);
    ASSERT_EQ(ms.size(), ids.size());
    std::size_t total = 0, nonzero = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      for (std::size_t p = 0; p < lm.labels.size(); ++p) EXPECT_EQ(ms[k][p], lm.labels[p] == ids[k]);
      total += ms[k].area();
      for (std::size_t j = k + 1; j < ids.size(); ++j) EXPECT_EQ(intersect_count(ms[k], ms[j]), 0u);
    }
    for (auto l : lm.labels) nonzero += l != 0;
    EXPECT_EQ(total, nonzero);
  }
}

TEST(ConnectedComponents, EmptyAndIsolatedPixels) {
  EXPECT_EQ(connected_components(BinaryMask(5, 5)).size(), 0u);
  const auto cc = connected_components(from_rows({"#..", "..#"}), Connectivity::four);
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0].area(), 1u);
  EXPECT_EQ(cc[1].area(), 1u);
}

namespace {

// Breadth-first flood fill from each unvisited pixel, written independently.
std::vector<BinaryMask> flood_fill_oracle(const BinaryMask& m, bool eight) {
  const int w = m.width(), h = m.height();
  std::vector<int> seen(m.size(), 0);
  std::vector<BinaryMask> out;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (!m.get(sx, sy) || seen[sy * w + sx]) continue;
      BinaryMask comp(w, h);
      std::vector<std::pair<int, int>> queue{{sx, sy}};
      seen[sy * w + sx] = 1;
      for (std::size_t q = 0; q < queue.size(); ++q) {
        const auto [x, y] = queue[q];
        comp.set(x, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0)) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !m.get(nx, ny) || seen[ny * w + nx]) continue;
            seen[ny * w + nx] = 1;
            queue.emplace_back(nx, ny);
          }
      }
      out.push_back(comp);
    }
  return out;
}

}  // namespace

TEST(ConnectedComponents, MatchesFloodFillOracle) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_mask(32, 32, 0.4, rng);
    for (bool eight : {false, true}) {
      const auto cc = connected_components(m, eight ? Connectivity::eight : Connectivity::four);
      auto expect = flood_fill_oracle(m, eight);
      ASSERT_EQ(cc.size(), expect.size());
      for (const auto& c : cc.masks) EXPECT_NE(std::find(expect.begin(), expect.end(), c), expect.end());
    }
  }
}

TEST(MaskOps, IntersectProperties) {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_mask(10, 10, 0.5, rng), b = random_mask(10, 10, 0.3, rng);
    std::size_t naive = 0;
    for (std::size_t i = 0; i < a.size(); ++i) naive += (a.bits()[i] & b.bits()[i]);
    EXPECT_EQ(intersect_count(a, b), naive);
    EXPECT_LE(intersect_count(a, b), std::min(a.area(), b.area()));
    EXPECT_EQ(intersect_count(a, a), a.area());
  }
}

TEST(MaskOps, UnionProperties) {
  Rng rng(10);
  EXPECT_EQ(union_all(std::vector<BinaryMask>{}, 3, 2), BinaryMask(3, 2));
  for (int t = 0; t < 30; ++t) {
    const auto a = random_mask(8, 6, 0.3, rng), b = random_mask(8, 6, 0.3, rng), c = random_mask(8, 6, 0.3, rng);
    BinaryMask naive(8, 6), complement(8, 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
      naive.set_index(i, a[i] || b[i] || c[i]);
      complement.set_index(i, !a[i]);
    }
    EXPECT_EQ(union_all(std::vector<BinaryMask>{a, b, c}, 8, 6), naive);
    EXPECT_EQ(union_all(std::vector<BinaryMask>{c, a, b}, 8, 6), naive);
    EXPECT_EQ(union_all(std::vector<BinaryMask>{a}, 8, 6), a);
    EXPECT_EQ(union_all(std::vector<BinaryMask>{a, a}, 8, 6), a);
    EXPECT_EQ(union_all(std::vector<BinaryMask>{a, complement}, 8, 6).area(), a.size());
  }
}

TEST(MaskOps, DownsampleExamples) {
  Rng rng(12);
  const auto m = random_mask(6, 4, 0.5, rng);
  EXPECT_EQ(downsample_mask(m, 1), m);
  BinaryMask ones(16, 16);
  for (std::size_t i = 0; i < ones.size(); ++i) ones.set_index(i);
  EXPECT_EQ(downsample_mask(ones, 16), from_rows({"#"}));
  for (int t = 0; t < 20; ++t) {
    const auto r = random_mask(32, 32, 0.5, rng);
    const auto d = downsample_mask(r, 4);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        int count = 0;
        for (int yy = 0; yy < 4; ++yy)
          for (int xx = 0; xx < 4; ++xx) count += r.get(4 * x + xx, 4 * y + yy);
        EXPECT_EQ(d.get(x, y), count >= 8);
      }
  }
}

TEST(MaskOps, UpsampleExamples) {
  const auto one = from_rows({"#"});
  const auto up = upsample_mask(one, 4);
  EXPECT_EQ(up.area(), 16u);
  EXPECT_EQ(upsample_mask(from_rows({"#.", ".#"}), 1), from_rows({"#.", ".#"}));
}

TEST(MaskOps, DownsampleMasksRecomputesDisjoint) {
  MaskSet ms(4, 2, true);
  ms.push_back(from_rows({"##..", "...."}));
  ms.push_back(from_rows({"..##", "...."}));
  const auto d = downsample_masks(ms, 2);
  EXPECT_EQ(d.width, 2);
  EXPECT_TRUE(d.disjoint);
}
