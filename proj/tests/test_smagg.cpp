#include <gtest/gtest.h>

#include "maskinject/oracles.hpp"
#include "maskinject/random.hpp"
#include "maskinject/smagg.hpp"

using namespace maskinject;

namespace {

BinaryMask random_blob(int w, int h, Rng& rng) {
  BinaryMask m(w, h);
  const int x0 = static_cast<int>(rng.uniform_int(0, w - 1)), y0 = static_cast<int>(rng.uniform_int(0, h - 1));
  const int x1 = static_cast<int>(rng.uniform_int(x0, w - 1)), y1 = static_cast<int>(rng.uniform_int(y0, h - 1));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (rng.uniform() < 0.85) m.set(x, y);
  return m;
}

MaskSet random_set(int n, int w, int h, Rng& rng) {
  MaskSet s(w, h, false);
  for (int i = 0; i < n; ++i) s.push_back(random_blob(w, h, rng));
  s.disjoint = s.verify_disjoint();
  return s;
}

// Disjoint class masks from a random per-cell label.
MaskSet random_text(int K, int w, int h, Rng& rng) {
  MaskSet t(w, h, true);
  for (int k = 0; k < K; ++k) t.masks.emplace_back(w, h);
  for (int c = 0; c < w * h; ++c) {
    const auto k = rng.uniform_int(-1, K - 1);
    if (k >= 0) t.masks[static_cast<std::size_t>(k)].set_index(static_cast<std::size_t>(c));
  }
  return t;
}

void expect_same(const AggregationResult& a, const AggregationResult& b) {
  ASSERT_EQ(a.masks.size(), b.masks.size());
  for (std::size_t i = 0; i < a.masks.size(); ++i) {
    EXPECT_EQ(a.masks[i], b.masks[i]);
    EXPECT_EQ(a.class_of[i], b.class_of[i]);
    EXPECT_EQ(a.provenance[i], b.provenance[i]);
  }
}

}  // namespace

TEST(MatchingScores, Examples) {
  BinaryMask m(10, 10);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_index(i);
  MaskSet a(10, 10), b(10, 10);
  a.push_back(m);
  b.push_back(m);
  b.push_back(BinaryMask(10, 10));
  const auto s = matching_scores(a, b);
  EXPECT_DOUBLE_EQ(s.at(0, 0), 100.0 / (100.0 + 1e-6));
  EXPECT_LT(s.at(0, 0), 1.0);
  EXPECT_EQ(s.at(0, 1), 0.0);
  EXPECT_THROW(matching_scores(a, b, 0.0), Error);
  MaskSet odd(3, 3);
  odd.push_back(BinaryMask(3, 3));
  EXPECT_THROW(matching_scores(a, odd), Error);
}

TEST(MatchingScores, CountingOracle) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto sam = random_set(5, 16, 16, rng);
    const auto text = random_text(3, 16, 16, rng);
    const auto s = matching_scores(sam, text);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        double inter = 0, area = 0;
        for (int y = 0; y < 16; ++y)
          for (int x = 0; x < 16; ++x) {
            area += sam[i].get(x, y);
            inter += sam[i].get(x, y) && text[k].get(x, y);
          }
        EXPECT_EQ(s.at(i, k), inter / (area + 1e-6));
      }
  }
}

TEST(MatchingScores, FullResolutionVariant) {
  MaskSet sam(4, 4), text(2, 2);
  BinaryMask a(4, 4);
  a.set(0, 0);
  sam.push_back(a);
  BinaryMask t(2, 2);
  t.set(0, 0);
  text.push_back(t);
  // One pixel out of a 2x2 block loses the majority vote at the text grid.
  EXPECT_EQ(matching_scores(sam, text).at(0, 0), 0.0);
  EXPECT_NEAR(matching_scores(sam, text, 1e-6, MatchResolution::full).at(0, 0), 1.0, 1e-5);
}

TEST(Aggregate, NoTextIsPassthrough) {
  Rng rng(4);
  const auto sam = random_set(4, 8, 8, rng);
  const auto r = aggregate(sam, MaskSet(8, 8));
  expect_same(r, passthrough(sam));
  for (const auto& c : r.class_of) EXPECT_FALSE(c.has_value());
  EXPECT_EQ(aggregate(MaskSet(8, 8), random_text(2, 8, 8, rng)).masks.size(), 0u);
}

TEST(Aggregate, MaskInsideClass) {
  MaskSet sam(6, 6), text(6, 6, true);
  BinaryMask s(6, 6), t(6, 6);
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 3; ++x) s.set(x, y);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) t.set(x, y);
  sam.push_back(s);
  text.push_back(BinaryMask(6, 6));
  text.push_back(t);
  const auto r = aggregate(sam, text, 0.5);
  ASSERT_EQ(r.masks.size(), 1u);
  EXPECT_EQ(r.masks[0], s);
  EXPECT_EQ(r.class_of[0], 1);
  EXPECT_EQ(r.provenance[0], std::vector<std::size_t>{0});
  EXPECT_THROW(aggregate(sam, text, 1.0), Error);
  EXPECT_THROW(aggregate(sam, text, -0.1), Error);
}

TEST(Aggregate, TiesGoToLowestClass) {
  MaskSet sam(4, 1), text(4, 1, true);
  BinaryMask s(4, 1, {1, 1, 1, 1});
  sam.push_back(s);
  text.push_back(BinaryMask(4, 1, {1, 1, 0, 0}));
  text.push_back(BinaryMask(4, 1, {0, 0, 1, 1}));
  const auto r = aggregate(sam, text, 0.3);
  ASSERT_EQ(r.masks.size(), 1u);
  EXPECT_EQ(r.class_of[0], 0);
}

TEST(Aggregate, SmallGridMatchesOracle) {
  // 3 proposals, 2 class masks on a 4x4 grid
  MaskSet sam(4, 4), text(4, 4, true);
  sam.push_back(BinaryMask(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}));
  sam.push_back(BinaryMask(4, 4, {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0}));
  sam.push_back(BinaryMask(4, 4, {0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0}));
  text.push_back(BinaryMask(4, 4, {1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0}));
  text.push_back(BinaryMask(4, 4, {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0}));
  const auto r = aggregate(sam, text, 0.5);
  expect_same(r, oracle::oracle_aggregate(sam, text, 0.5));
  ASSERT_EQ(r.masks.size(), 2u);
  EXPECT_EQ(r.provenance[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_FALSE(r.class_of[1].has_value());
}

TEST(Aggregate, RandomInstancesMatchOracle) {
  Rng rng(2024);
  for (int t = 0; t < 300; ++t) {
    const int tw = static_cast<int>(rng.uniform_int(1, 8));
    const int f = static_cast<int>(rng.uniform_int(1, 2));
    const int W = tw * f;
    const auto sam = random_set(static_cast<int>(rng.uniform_int(0, 7)), W, W, rng);
    const auto text = random_text(static_cast<int>(rng.uniform_int(0, 4)), tw, tw, rng);
    const double alpha = rng.uniform(0.0, 0.95);
    const auto r = aggregate(sam, text, alpha);
    expect_same(r, oracle::oracle_aggregate(sam, text, alpha));
    EXPECT_LE(r.masks.size(), sam.size());
    EXPECT_EQ(union_all(r.masks), union_all(sam));
    const auto scores = matching_scores(sam, text);
    for (std::size_t i = 0; i < r.masks.size(); ++i)
      if (r.class_of[i]) {
        for (auto src : r.provenance[i]) EXPECT_GT(scores.at(src, static_cast<std::size_t>(*r.class_of[i])), alpha);
      }
  }
}

TEST(Aggregate, EqualityIffNoMerge) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto sam = random_set(5, 8, 8, rng);
    const auto r = aggregate(sam, random_text(3, 8, 8, rng), 0.4);
    bool merged = false;
    for (const auto& p : r.provenance) merged |= p.size() > 1;
    EXPECT_EQ(r.masks.size() == sam.size(), !merged);
  }
}

TEST(Aggregate, MergedCountMonotoneInAlpha) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const auto sam = random_set(6, 12, 12, rng);
    const auto text = random_text(3, 12, 12, rng);
    std::size_t prev = 0;
    for (double a : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto n = aggregate(sam, text, a).masks.size();
      EXPECT_GE(n, prev);
      prev = n;
    }
  }
}

TEST(Aggregate, AlphaZeroMergesEveryOverlappingProposal) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    const auto sam = random_set(5, 8, 8, rng);
    const auto text = random_text(2, 8, 8, rng);
    const auto r = aggregate(sam, text, 0.0);
    const auto s = matching_scores(sam, text);
    std::size_t unmatched = 0;
    for (std::size_t i = 0; i < sam.size(); ++i) unmatched += (s.at(i, 0) == 0.0 && s.at(i, 1) == 0.0);
    std::size_t untagged = 0;
    for (const auto& c : r.class_of) untagged += !c.has_value();
    EXPECT_EQ(untagged, unmatched);
  }
}
