#pragma once

#include <cstddef>
#include <vector>

#include "knobsync/data.hpp"
#include "knobsync/kernelcdf.hpp"
#include "knobsync/kmeans.hpp"

namespace knobsync {

// Normed residuals: Psi_i = ||X_i - mu_{label(i)}|| (Euclidean). Rows with
// missing cells use the rescaled form sqrt((p/p_i) * sum_observed (x_j - mu_j)^2),
// which reduces to the plain norm when everything is observed.
std::vector<double> normed_residuals(const DataMatrix& m, const Partition& part);

// Distance from row i to the centroid of sub-cluster c (missing-rescaled).
double residual_to_centroid(const DataMatrix& m, std::size_t i,
                            const Partition& part, int c);

// Normed pseudo-residual: the minimum missing-rescaled distance from row i to
// any centroid in `targets` (sub-cluster ids into part).
double pseudo_residual(const DataMatrix& m, std::size_t i, const Partition& part,
                       const std::vector<int>& targets);

// Groups of sub-clusters: the state the merging phase evolves. groups is a
// partition of {0..K-1}; group_of maps a sub-cluster id to its group index.
struct ClusterForest {
  std::vector<std::vector<int>> groups;
  std::vector<int> group_of;

  std::size_t size() const { return groups.size(); }
  std::size_t sub_cluster_count() const { return group_of.size(); }
};

ClusterForest singleton_forest(std::size_t K);

// Directed and total overlap between two clusters or groups. total is the sum
// of the two directed misclassification probabilities, so it lives in [0, 2].
struct PairOverlap {
  double l_given_k = 0.0;
  double k_given_l = 0.0;
  double total = 0.0;
};

// Pairwise overlap between sub-clusters k and l:
//   w_{l|k} = 1 - (1/n_k) sum_{i: label(i)=k} H(||X_i - mu_l||; b)
// with each conditional clamped into [0, 1].
PairOverlap pairwise_overlap(const ResidualCdf& cdf, const DataMatrix& m,
                             const Partition& part, int k, int l);

// Composite overlap between groups of sub-clusters:
//   w_{Cl|Ck} = [ 1 - (1/n_k) sum_{i in Ck} H(min_{r in Cl} ||X_i - mu_r||; b) ]^{|Ck|}
// where n_k counts observations in the conditioning group and |Ck| its
// sub-clusters. On singleton groups this is bit-identical to pairwise_overlap.
PairOverlap composite_overlap(const ResidualCdf& cdf, const DataMatrix& m,
                              const Partition& part, const ClusterForest& forest,
                              int gk, int gl);

// Symmetric overlap matrix with unit diagonal; entry (k,l) = total overlap.
struct OverlapMatrix {
  std::size_t K = 0;
  std::vector<double> a;  // row-major K*K

  double at(std::size_t k, std::size_t l) const { return a[k * K + l]; }
  double& at(std::size_t k, std::size_t l) { return a[k * K + l]; }
};

OverlapMatrix overlap_matrix(const ResidualCdf& cdf, const DataMatrix& m,
                             const Partition& part, const ClusterForest& forest);

// Dominant eigenvalue of a symmetric nonnegative matrix by power iteration
// from the all-ones vector (relative tolerance 1e-12, at most 1e5 iterations;
// if the budget is exhausted the final Rayleigh-quotient estimate is
// returned, which for these matrices is within the spread of the top
// eigenvalue cluster).
double symmetric_dominant_eigenvalue(const std::vector<double>& a, std::size_t K);

// Generalized overlap (lambda_max - 1)/(K - 1); 0 by convention for K = 1.
double generalized_overlap(const OverlapMatrix& om);

struct MaxOverlap {
  double value = 0.0;
  int k = -1;
  int l = -1;  // k < l; ties resolved toward the lexicographically smallest pair
};

MaxOverlap max_overlap(const OverlapMatrix& om);

// Precomputed machinery shared by overlap evaluations during merging: the
// n x K matrix of missing-rescaled row-to-centroid distances and the member
// lists per sub-cluster. Centroids and the CDF stay fixed throughout merging,
// so this is computed once per partition.
struct OverlapContext {
  const ResidualCdf* cdf = nullptr;
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<double> dist;               // row-major n*K
  std::vector<std::vector<int>> members;  // rows per sub-cluster, ascending
};

OverlapContext make_overlap_context(const ResidualCdf& cdf, const DataMatrix& m,
                                    const Partition& part);

PairOverlap composite_overlap_ctx(const OverlapContext& ctx,
                                  const std::vector<int>& group_k,
                                  const std::vector<int>& group_l);

OverlapMatrix overlap_matrix_ctx(const OverlapContext& ctx, const ClusterForest& forest);

}  // namespace knobsync
