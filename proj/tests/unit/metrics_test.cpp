#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "posbias/metrics.hpp"
#include "posbias/rng.hpp"

using namespace posbias;

namespace {

TrialRecord record(const std::string &parent, std::size_t m, std::size_t k, std::size_t pick) {
  TrialRecord r;
  r.experiment = "swap_audit";
  r.parent_id = parent;
  r.variant_key = "k=" + std::to_string(k);
  r.variant_index = k;
  r.option_count = m;
  r.correct_index = k;
  r.correct_label = position_label(k);
  r.pick_index = pick;
  if (pick) r.pick = position_label(pick);
  r.correct = pick == k;
  return r;
}

/// Parents listed as pick vectors: picks[p][k-1] is the pick for variant k.
std::vector<TrialRecord> store_of(const std::vector<std::vector<std::size_t>> &picks) {
  std::vector<TrialRecord> out;
  for (std::size_t p = 0; p < picks.size(); ++p) {
    for (std::size_t k = 1; k <= picks[p].size(); ++k) {
      out.push_back(record("p" + std::to_string(p), picks[p].size(), k, picks[p][k - 1]));
    }
  }
  return out;
}

}  // namespace

TEST(Metrics, PerfectAndAlwaysFirst) {
  const auto perfect = store_of({{1, 2, 3, 4}, {1, 2, 3, 4}});
  const auto t = tally(perfect);
  EXPECT_EQ(accuracy(t), 1.0);
  EXPECT_EQ(circular_accuracy(perfect), 1.0);
  EXPECT_EQ(pia(t).value, 1.0);

  const auto first = store_of({{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}});
  const auto f = tally(first);
  EXPECT_EQ(accuracy(f), 0.25);
  EXPECT_EQ(circular_accuracy(first), 0.0);
  EXPECT_EQ(pia(f).value, 0.0625);
}

// Hand computation, N = 2, M = 4, one unparseable trial.
TEST(Metrics, HandWorkedPia) {
  const auto records = store_of({{1, 2, 0, 4}, {1, 1, 2, 1}});
  const auto t = tally(records);
  EXPECT_EQ(t.correct, (std::vector<std::size_t>{2, 1, 0, 1}));
  EXPECT_EQ(t.picks, (std::vector<std::size_t>{4, 2, 0, 1}));
  // C = (2,1,0,1), Pr = (4,2,0,1): (1/4)(2/4*2/2 + 1/2*1/2 + 0 + 1*1/2) = 0.3125
  EXPECT_DOUBLE_EQ(pia(t).value, 0.3125);
  EXPECT_DOUBLE_EQ(accuracy(t), 4.0 / 8.0);
  EXPECT_EQ(t.unparseable, 1u);
  EXPECT_EQ(circular_accuracy(records), 0.0);
}

TEST(Metrics, PositionNeverPickedContributesZero) {
  const auto records = store_of({{2, 2}, {2, 2}});
  const auto b = pia(tally(records));
  EXPECT_EQ(b.weight[0], 0.0);
  EXPECT_DOUBLE_EQ(b.value, 0.5 * (2.0 / 4.0) * (2.0 / 2.0));
}

TEST(Metrics, IncompleteGroupsNamed) {
  auto records = store_of({{1, 2, 3, 4}, {1, 2, 3, 4}});
  records.erase(records.begin() + 5);
  try {
    tally(records);
    FAIL();
  } catch (const IncompleteGroupsError &e) {
    ASSERT_EQ(e.missing().size(), 1u);
    EXPECT_EQ(e.missing()[0], (std::pair<std::string, std::size_t>{"p1", 2}));
  }
}

TEST(Metrics, EmptyStoreIsDataError) {
  EXPECT_THROW(pia(tally(std::vector<TrialRecord>{})), DataError);
}

TEST(Metrics, ScaleInvariance) {
  const auto base = store_of({{1, 3, 3, 4}, {2, 2, 1, 4}, {1, 2, 3, 4}});
  auto doubled = base;
  for (auto r : base) {
    r.parent_id += "-copy";
    doubled.push_back(r);
  }
  EXPECT_DOUBLE_EQ(pia(tally(base)).value, pia(tally(doubled)).value);
  EXPECT_DOUBLE_EQ(accuracy(tally(base)), accuracy(tally(doubled)));
  EXPECT_DOUBLE_EQ(circular_accuracy(base), circular_accuracy(doubled));
}

TEST(Metrics, PreferenceHistogramExcludesAllCorrect) {
  const auto records = store_of({{1, 2, 3, 4}, {1, 1, 1, 4}, {2, 2, 3, 1}});
  const auto h = preference_histogram(records);
  EXPECT_EQ(h.excluded_parents, 1u);
  EXPECT_EQ(h.remaining_parents, 2u);
  EXPECT_EQ(h.correct_by_position, (std::vector<std::size_t>{1, 1, 1, 1}));
}

TEST(Metrics, PiaExclusionVariant) {
  const auto records = store_of({{1, 2, 3, 4}, {1, 1, 1, 1}});
  const auto filtered = pia_excluding_all_correct(records);
  ASSERT_TRUE(filtered.has_value());
  EXPECT_DOUBLE_EQ(filtered->value, 0.0625);
  EXPECT_FALSE(pia_excluding_all_correct(store_of({{1, 2}})).has_value());
}

// Independent recount over raw records.
TEST(Metrics, MatchesBruteForceOnRandomStores) {
  Stream s(31337);
  for (int store_no = 0; store_no < 30; ++store_no) {
    const std::size_t m = 2 + s.below(4);
    const std::size_t n = 1 + s.below(40);
    std::vector<std::vector<std::size_t>> picks(n, std::vector<std::size_t>(m));
    for (auto &parent : picks) {
      for (std::size_t k = 1; k <= m; ++k) parent[k - 1] = s.uniform() < 0.4 ? k : s.below(m + 1);
    }
    const auto records = store_of(picks);

    std::vector<double> c(m), pr(m);
    std::size_t all_correct = 0;
    std::vector<double> hist(m);
    for (const auto &parent : picks) {
      bool every = true;
      for (std::size_t k = 1; k <= m; ++k) {
        const bool ok = parent[k - 1] == k;
        if (ok) c[k - 1] += 1;
        if (parent[k - 1]) pr[parent[k - 1] - 1] += 1;
        every = every && ok;
      }
      if (every) {
        ++all_correct;
      } else {
        for (std::size_t k = 1; k <= m; ++k) hist[k - 1] += parent[k - 1] == k;
      }
    }
    double sum_c = 0, oracle_pia = 0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_c += c[i];
      if (pr[i] > 0) oracle_pia += (c[i] / pr[i]) * (c[i] / n);
    }
    oracle_pia /= m;

    const auto t = tally(records);
    EXPECT_NEAR(accuracy(t), sum_c / (m * n), 1e-12);
    EXPECT_NEAR(circular_accuracy(records), double(all_correct) / n, 1e-12);
    EXPECT_NEAR(pia(t).value, oracle_pia, 1e-12);
    const auto h = preference_histogram(records);
    for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(double(h.correct_by_position[i]), hist[i]);
  }
}

TEST(Metrics, BoundChain) {
  Stream s(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 2 + s.below(4);
    std::vector<double> hit(m);
    for (auto &h : hit) h = s.uniform();
    const auto records = posbias::testing::simulated_audit(100, BiasProfile::with_uniform_fallback(hit), trial);
    const auto t = tally(records);
    const double acc = accuracy(t), p = pia(t).value, circ = circular_accuracy(records);
    EXPECT_LE(p, acc + 1e-12);
    EXPECT_LE(circ, acc + 1e-12);
    EXPECT_LE(acc * acc, p + 1e-12);
  }
}

TEST(Spearman, AverageRanks) {
  const std::vector<double> v{10, 20, 20, 40};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Spearman, TiesExample) {
  const std::vector<double> a{1, 2, 2, 4}, b{1, 3, 2, 4};
  // ranks a = (1, 2.5, 2.5, 4), b = (1, 3, 2, 4); Pearson of ranks = 4.5 / sqrt(4.5 * 5)
  EXPECT_NEAR(spearman(a, b), 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
}

TEST(Spearman, Endpoints) {
  const std::vector<double> a{1, 2, 3, 4, 5}, up{2, 4, 8, 16, 32}, down{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(a, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, down), -1.0);
}

TEST(Spearman, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, constant{2, 2, 2}, one{1};
  EXPECT_THROW(spearman(a, b), std::invalid_argument);
  EXPECT_THROW(spearman(a, constant), std::invalid_argument);
  EXPECT_THROW(spearman(one, one), std::invalid_argument);
}

TEST(Placement, ComparisonAndDeltas) {
  std::vector<TrialRecord> records;
  const std::array<std::string, 3> tags{"front", "middle", "back"};
  for (int p = 0; p < 4; ++p) {
    for (std::size_t i = 1; i <= 3; ++i) {
      TrialRecord r;
      r.experiment = "keyframe_placement";
      r.parent_id = "v" + std::to_string(p);
      r.variant_key = tags[i - 1];
      r.variant_index = i;
      r.option_count = 2;
      r.correct_index = 1;
      r.correct = i == 3 || p < int(i);  // front 1/4, middle 2/4, back 4/4
      r.pick_index = r.correct ? 1 : 2;
      records.push_back(r);
    }
  }
  const auto c = placement_comparison(records);
  ASSERT_EQ(c.scores.size(), 3u);
  EXPECT_EQ(c.scores[0].tag, "front");
  EXPECT_DOUBLE_EQ(c.scores[0].accuracy, 0.25);
  EXPECT_DOUBLE_EQ(c.scores[1].accuracy, 0.5);
  EXPECT_DOUBLE_EQ(c.scores[2].accuracy, 1.0);
  ASSERT_EQ(c.deltas.size(), 2u);
  EXPECT_EQ(c.deltas[0].reference, "back");
  EXPECT_DOUBLE_EQ(c.deltas[0].delta, 0.75);
  EXPECT_DOUBLE_EQ(c.deltas[1].delta, 0.5);
}

TEST(MetricsReport, JsonRoundTrip) {
  const auto records = posbias::testing::simulated_audit(20, BiasProfile::with_uniform_fallback({0.8, 0.3, 0.9}), 1);
  const auto report = score_swap_audit(records, "sim", {"simulated:x", "abc", "def", 7});
  const auto back = MetricsReport::from_json(report.to_json());
  EXPECT_EQ(back.to_json(), report.to_json());
  EXPECT_EQ(back.provenance.seed, 7u);
}
