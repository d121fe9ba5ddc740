#include <gtest/gtest.h>

#include <cstdint>
#include <vector>

#include "knobsync/error.hpp"
#include "knobsync/eval.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using knobsync::error;

TEST(AdjustedRandIndex, KnownValues) {
  EXPECT_DOUBLE_EQ(knobsync::adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}), 1.0);
  // Classic textbook pair: ARI = 8/33.
  EXPECT_NEAR(knobsync::adjusted_rand_index({1, 1, 2, 2, 3, 3},
                                            {1, 1, 1, 2, 2, 2}),
              8.0 / 33.0, 1e-15);
}

TEST(AdjustedRandIndex, DegenerateRuleGivesOneOnIdenticalTrivialPartitions) {
  // Both all-singletons and both single-block hit the zero-denominator case;
  // identical set partitions score 1 regardless of the label values used.
  EXPECT_DOUBLE_EQ(knobsync::adjusted_rand_index({0, 1, 2, 3}, {7, 5, 3, 1}), 1.0);
  EXPECT_DOUBLE_EQ(knobsync::adjusted_rand_index({5, 5, 5}, {2, 2, 2}), 1.0);
}

TEST(AdjustedRandIndex, SingletonsVersusOneBlockIsZero) {
  EXPECT_DOUBLE_EQ(knobsync::adjusted_rand_index({0, 1, 2}, {0, 0, 0}), 0.0);
}

TEST(AdjustedRandIndex, ExhaustivelyMatchesPairCountingOracle) {
  // Every pair of labelings of 4 items over an alphabet of 4 labels.
  const int n = 4;
  std::vector<std::vector<int>> all;
  for (int code = 0; code < 256; ++code) {
    std::vector<int> v(n);
    int c = code;
    for (int i = 0; i < n; ++i) {
      v[i] = c % 4;
      c /= 4;
    }
    all.push_back(v);
  }
  for (const auto& a : all)
    for (const auto& b : all) {
      double lib = knobsync::adjusted_rand_index(a, b);
      double ref = testsupport::pair_counting_ari(a, b);
      ASSERT_NEAR(lib, ref, 1e-12);
    }
}

TEST(AdjustedRandIndex, RandomPairsMatchOracle) {
  testsupport::Rng rng(1029);
  for (int rep = 0; rep < 1000; ++rep) {
    int n = 5 + static_cast<int>(rng.below(4));  // 5..8
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
      b[i] = static_cast<int>(rng.below(3));
    }
    ASSERT_NEAR(knobsync::adjusted_rand_index(a, b),
                testsupport::pair_counting_ari(a, b), 1e-12)
        << "rep " << rep;
  }
}

TEST(AdjustedRandIndex, Errors) {
  EXPECT_THROW(knobsync::adjusted_rand_index({1, 2}, {1}), error);
  EXPECT_THROW(knobsync::adjusted_rand_index({1}, {1}), error);
}

TEST(JaccardIndex, HandExamples) {
  EXPECT_NEAR(knobsync::jaccard_index({1, 1, 0}, {1, 0, 1}), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(knobsync::jaccard_index({1, 1}, {1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(knobsync::jaccard_index({0, 0}, {0, 0}), 1.0);  // both empty
  EXPECT_DOUBLE_EQ(knobsync::jaccard_index({1, 0}, {0, 1}), 0.0);
  EXPECT_THROW(knobsync::jaccard_index({1}, {1, 0}), error);
}

TEST(SummarizedJaccard, PoolsIntersectionsOverUnions) {
  std::vector<std::vector<std::uint8_t>> maps = {
      {1, 1, 0}, {1, 0, 1}, {1, 0, 0}};
  // Pairs: (0,1) 1/3, (0,2) 1/2, (1,2) 1/2 -> pooled 3/7.
  EXPECT_NEAR(knobsync::summarized_jaccard(maps), 3.0 / 7.0, 1e-15);

  std::vector<std::vector<std::uint8_t>> empty_maps = {{0, 0}, {0, 0}, {0, 0}};
  EXPECT_DOUBLE_EQ(knobsync::summarized_jaccard(empty_maps), 1.0);

  EXPECT_THROW(knobsync::summarized_jaccard({{1, 0}}), error);
}

TEST(ConfusionMatrix, FirstAppearanceOrderWithMargins) {
  auto t = knobsync::confusion_matrix({1, 1, 2}, {5, 7, 7});
  ASSERT_EQ(t.rows, 2u);
  ASSERT_EQ(t.cols, 2u);
  EXPECT_EQ(t.row_labels, (std::vector<int>{1, 2}));
  EXPECT_EQ(t.col_labels, (std::vector<int>{5, 7}));
  EXPECT_EQ(t.at(0, 0), 1u);
  EXPECT_EQ(t.at(0, 1), 1u);
  EXPECT_EQ(t.at(1, 0), 0u);
  EXPECT_EQ(t.at(1, 1), 1u);
  EXPECT_EQ(t.row_sums, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(t.col_sums, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(t.total, 3u);
}

TEST(ConfusionMatrix, RowsFollowTrueLabels) {
  auto t = knobsync::confusion_matrix({9, 3, 9, 3}, {0, 0, 1, 1});
  EXPECT_EQ(t.row_labels, (std::vector<int>{9, 3}));
  EXPECT_EQ(t.at(0, 0), 1u);  // true 9 estimated 0
  EXPECT_EQ(t.at(0, 1), 1u);  // true 9 estimated 1
  EXPECT_EQ(t.at(1, 0), 1u);
  EXPECT_EQ(t.at(1, 1), 1u);
  EXPECT_THROW(knobsync::confusion_matrix({1, 2}, {1}), error);
}
