#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "posbias/rng.hpp"
#include "posbias/variants.hpp"

using namespace posbias;
using posbias::testing::text_probe;

namespace {

std::multiset<std::string> contents(const ProbeItem &item) {
  std::multiset<std::string> out;
  for (const auto &s : item.slots) out.insert(s.content.primary.text);
  return out;
}

FrameManifest numbered_manifest(std::size_t total, KeyRange key) {
  FrameManifest m;
  m.fps = 3;
  m.caption = "jumping";
  for (std::size_t i = 0; i < total; ++i) m.frames.push_back(ModalityAtom::from_text("frame" + std::to_string(i)));
  m.key_range = key;
  return m;
}

}  // namespace

TEST(SwapVariants, FourOptionsCorrectAtC) {
  const auto item = text_probe("q", 4, 3);
  const auto set = swap_variants(item);
  ASSERT_EQ(set.variants.size(), 4u);
  for (std::size_t k = 1; k <= 4; ++k) {
    const auto &v = set.variants[k - 1];
    EXPECT_EQ(v.correct_index, k);
    EXPECT_EQ(v.slots[k - 1].content, item.slots[2].content);
    EXPECT_EQ(v.slots[k - 1].label, position_label(k));
  }
  // the displaced option lands where the correct one used to be
  EXPECT_EQ(set.variants[0].slots[2].content, item.slots[0].content);
}

TEST(SwapVariants, TwoOptionsCorrectAtB) {
  const auto set = swap_variants(text_probe("q", 2, 2));
  ASSERT_EQ(set.variants.size(), 2u);
  EXPECT_EQ(set.variants[0].correct_index, 1u);
  EXPECT_EQ(set.variants[1].correct_index, 2u);
}

TEST(SwapVariants, RejectsSingleOption) {
  auto item = text_probe("q", 2, 1);
  item.slots.pop_back();
  EXPECT_THROW(swap_variants(item), DataError);
}

TEST(SwapVariants, PropertiesOverRandomItems) {
  Stream s(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t m = 2 + s.below(5);
    const std::size_t correct = 1 + s.below(m);
    const auto item = text_probe("r" + std::to_string(trial), m, correct);
    for (auto rule : {VariantRule::swap, VariantRule::rotate}) {
      const auto set = swap_variants(item, rule);
      std::set<std::size_t> covered;
      for (const auto &v : set.variants) {
        covered.insert(v.correct_index);
        ASSERT_EQ(contents(v), contents(item));
        ASSERT_EQ(v.slots[v.correct_index - 1].content, item.slots[correct - 1].content);
        ASSERT_EQ(v.labels(), item.labels());
      }
      ASSERT_EQ(covered.size(), m);
    }
    const std::size_t k = 1 + s.below(m);
    const auto once = swap_to(item, k);
    ASSERT_EQ(swap_to(once, correct).slots, item.slots);
  }
}

TEST(Orderings, FourShotsGiveTwentyFour) {
  const auto all = enumerate_orderings(4);
  ASSERT_EQ(all.size(), 24u);
  std::set<std::vector<std::size_t>> distinct;
  for (std::size_t r = 0; r < all.size(); ++r) {
    EXPECT_EQ(all[r].rank, r);
    EXPECT_EQ(ordering_rank(all[r].permutation), r);
    distinct.insert(all[r].permutation);
  }
  EXPECT_EQ(distinct.size(), 24u);
  EXPECT_EQ(all.front().permutation, (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(all.back().permutation, (std::vector<std::size_t>{4, 3, 2, 1}));
}

TEST(Orderings, EdgeCounts) {
  EXPECT_EQ(enumerate_orderings(1).size(), 1u);
  EXPECT_EQ(enumerate_orderings(3).size(), 6u);
  EXPECT_THROW(enumerate_orderings(9), std::invalid_argument);
  EXPECT_THROW(enumerate_orderings(0), std::invalid_argument);
}

TEST(Orderings, InverseRestoresOriginal) {
  const std::vector<std::string> items{"a", "b", "c", "d"};
  for (const auto &o : enumerate_orderings(4)) {
    const auto permuted = apply_ordering(items, o);
    EXPECT_EQ(apply_ordering(permuted, inverse(o)), items);
  }
}

TEST(Keyframes, FifteenFramesThreeKey) {
  const auto m = numbered_manifest(15, {0, 3});
  const std::array<std::size_t, 3> expected_first{0, 6, 12};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto placed = place_keyframes(m, kAllKeyframePlacements[i]);
    ASSERT_EQ(placed.frames.size(), 15u);
    EXPECT_EQ(placed.key_range.first, expected_first[i]);
    EXPECT_EQ(placed.key_range.length, 3u);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(placed.frames[expected_first[i] + j].text, "frame" + std::to_string(j));
    }
  }
}

TEST(Keyframes, FillerOrderIsPreserved) {
  const auto m = numbered_manifest(10, {4, 2});
  const auto back = place_keyframes(m, KeyframePlacement::back);
  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < 8; ++i) fillers.push_back(back.frames[i].text);
  EXPECT_EQ(fillers, (std::vector<std::string>{"frame0", "frame1", "frame2", "frame3", "frame6", "frame7",
                                               "frame8", "frame9"}));
}

TEST(Keyframes, OutOfBoundsKeyRangeIsRejected) {
  EXPECT_THROW(place_keyframes(numbered_manifest(5, {3, 3}), KeyframePlacement::front), DataError);
  const auto all_key = numbered_manifest(3, {0, 3});
  EXPECT_EQ(place_keyframes(all_key, KeyframePlacement::back), all_key);
}

TEST(Importance, BeginEnd) {
  const std::vector<double> scores{4, 1, 3, 2};
  const std::vector<int> items{1, 2, 3, 4};
  EXPECT_EQ(reorder_by_importance(std::span<const int>(items), scores, ImportanceStrategy::begin_end),
            (std::vector<int>{3, 2, 4, 1}));
  // scores reordered the same way read as the "most important at the edges" pattern
  std::vector<double> ordered_scores;
  for (auto idx : importance_order(scores, ImportanceStrategy::begin_end)) ordered_scores.push_back(scores[idx]);
  EXPECT_EQ(ordered_scores, (std::vector<double>{3, 1, 2, 4}));
}

TEST(Importance, EqualScoresKeepOrder) {
  const std::vector<double> scores{1, 1, 1};
  for (auto strategy : {ImportanceStrategy::begin_end, ImportanceStrategy::begin, ImportanceStrategy::end}) {
    EXPECT_EQ(importance_order(scores, strategy), (std::vector<std::size_t>{0, 1, 2}));
  }
}

// Closed-form oracle for the dealing rule: 0-based rank r goes to
// n-1-r/2 when r is even, (r-1)/2 when odd.
TEST(Importance, BeginEndMatchesDealingOracle) {
  Stream s(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + s.below(9);
    std::vector<double> scores(n);
    for (auto &v : scores) v = static_cast<double>(s.below(5));
    std::vector<std::size_t> by_rank(n);
    std::iota(by_rank.begin(), by_rank.end(), std::size_t{0});
    std::stable_sort(by_rank.begin(), by_rank.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    const bool all_equal = std::all_of(scores.begin(), scores.end(), [&](double v) { return v == scores[0]; });
    std::vector<std::size_t> expected(n);
    if (all_equal) {
      std::iota(expected.begin(), expected.end(), std::size_t{0});
    } else {
      for (std::size_t r = 0; r < n; ++r) expected[r % 2 == 0 ? n - 1 - r / 2 : (r - 1) / 2] = by_rank[r];
    }
    ASSERT_EQ(importance_order(scores, ImportanceStrategy::begin_end), expected);
  }
}

TEST(Importance, EndPutsArgmaxLast) {
  Stream s(78);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + s.below(9);
    std::vector<double> scores(n);
    for (auto &v : scores) v = s.uniform();
    const auto order = importance_order(scores, ImportanceStrategy::end);
    const auto argmax = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    ASSERT_EQ(order.back(), argmax);
  }
}

TEST(Importance, CountMismatchThrows) {
  const std::vector<int> items{1, 2};
  const std::vector<double> scores{1.0};
  EXPECT_THROW(reorder_by_importance(std::span<const int>(items), scores, ImportanceStrategy::end),
               std::invalid_argument);
}
