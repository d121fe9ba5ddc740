#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace knobsync {

// Adjusted Rand index between two hard partitions of the same items.
// Degenerate case (zero denominator, e.g. both all-singletons or both a
// single block): 1 when the partitions are identical as set partitions,
// otherwise 0.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Jaccard index |A ∩ B| / |A ∪ B| of two binary maps (activation masks);
// both maps empty counts as perfect agreement (1).
double jaccard_index(const std::vector<std::uint8_t>& a,
                     const std::vector<std::uint8_t>& b);

// Summarized Jaccard over replications: sum of pairwise intersections over
// sum of pairwise unions, across all unordered pairs of maps.
double summarized_jaccard(const std::vector<std::vector<std::uint8_t>>& maps);

// Contingency/confusion table between true and estimated labels. Rows follow
// the first appearance order of true labels, columns that of estimated ones.
struct Contingency {
  std::vector<int> row_labels;        // true labels, by first appearance
  std::vector<int> col_labels;        // estimated labels, by first appearance
  std::vector<std::size_t> cell;      // row-major rows x cols
  std::vector<std::size_t> row_sums;  // a_i
  std::vector<std::size_t> col_sums;  // b_j
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t total = 0;

  std::size_t at(std::size_t r, std::size_t c) const { return cell[r * cols + c]; }
};

Contingency confusion_matrix(const std::vector<int>& true_labels,
                             const std::vector<int>& est_labels);

}  // namespace knobsync
