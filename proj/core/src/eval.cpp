#include "knobsync/eval.hpp"

#include <algorithm>
#include <map>

#include "knobsync/error.hpp"

namespace knobsync {

namespace {

// Number of unordered pairs, n choose 2, in floating point (n can be large
// enough that intermediate products overflow 64-bit when combined later).
double choose2(double n) { return n * (n - 1.0) / 2.0; }

// True when a and b describe the same set partition (equal up to relabeling).
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, int> a_to_b, b_to_a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it_ab, new_ab] = a_to_b.emplace(a[i], b[i]);
    if (!new_ab && it_ab->second != b[i]) return false;
    auto [it_ba, new_ba] = b_to_a.emplace(b[i], a[i]);
    if (!new_ba && it_ba->second != a[i]) return false;
  }
  return true;
}

}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw error(errc::bad_argument, "label vectors differ in length");
  if (a.size() < 2) throw error(errc::bad_argument, "need at least two items");

  Contingency t = confusion_matrix(a, b);

  double sum_cells = 0.0;
  for (std::size_t c : t.cell) sum_cells += choose2(static_cast<double>(c));
  double sum_rows = 0.0;
  for (std::size_t s : t.row_sums) sum_rows += choose2(static_cast<double>(s));
  double sum_cols = 0.0;
  for (std::size_t s : t.col_sums) sum_cols += choose2(static_cast<double>(s));

  double expected = sum_rows * sum_cols / choose2(static_cast<double>(t.total));
  double maximum = 0.5 * (sum_rows + sum_cols);
  double denom = maximum - expected;
  if (denom == 0.0) return same_partition(a, b) ? 1.0 : 0.0;
  return (sum_cells - expected) / denom;
}

double jaccard_index(const std::vector<std::uint8_t>& a,
                     const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw error(errc::bad_argument, "maps differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool in_a = a[i] != 0, in_b = b[i] != 0;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double summarized_jaccard(const std::vector<std::vector<std::uint8_t>>& maps) {
  if (maps.size() < 2)
    throw error(errc::bad_argument, "summarized Jaccard needs at least two maps");
  const std::size_t len = maps.front().size();
  for (const auto& m : maps)
    if (m.size() != len) throw error(errc::bad_argument, "maps differ in length");

  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i + 1 < maps.size(); ++i) {
    for (std::size_t j = i + 1; j < maps.size(); ++j) {
      for (std::size_t k = 0; k < len; ++k) {
        bool in_a = maps[i][k] != 0, in_b = maps[j][k] != 0;
        inter += in_a && in_b;
        uni += in_a || in_b;
      }
    }
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Contingency confusion_matrix(const std::vector<int>& true_labels,
                             const std::vector<int>& est_labels) {
  if (true_labels.size() != est_labels.size())
    throw error(errc::bad_argument, "label vectors differ in length");

  Contingency t;
  std::map<int, std::size_t> row_of, col_of;
  for (int v : true_labels) {
    if (row_of.emplace(v, t.row_labels.size()).second) t.row_labels.push_back(v);
  }
  for (int v : est_labels) {
    if (col_of.emplace(v, t.col_labels.size()).second) t.col_labels.push_back(v);
  }
  t.rows = t.row_labels.size();
  t.cols = t.col_labels.size();
  t.total = true_labels.size();
  t.cell.assign(t.rows * t.cols, 0);
  for (std::size_t i = 0; i < true_labels.size(); ++i)
    ++t.cell[row_of[true_labels[i]] * t.cols + col_of[est_labels[i]]];

  t.row_sums.assign(t.rows, 0);
  t.col_sums.assign(t.cols, 0);
  for (std::size_t r = 0; r < t.rows; ++r)
    for (std::size_t c = 0; c < t.cols; ++c) {
      t.row_sums[r] += t.at(r, c);
      t.col_sums[c] += t.at(r, c);
    }
  return t;
}

}  // namespace knobsync
