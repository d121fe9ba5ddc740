#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "knobsync/data.hpp"

namespace knobsync {

// Hard partition of the rows of a DataMatrix into K sub-clusters.
struct Partition {
  std::size_t K = 0;
  std::vector<int> labels;              // n entries in 0..K-1, every value used
  std::vector<double> centroids;        // row-major K*p
  std::vector<std::uint8_t> is_scatter; // K flags; a scatter cluster is a singleton
  double wss = 0.0;                     // sum of squared distances over observed coords
  std::size_t iterations = 0;           // Lloyd iterations of the winning start
  bool converged = true;

  std::vector<std::size_t> counts() const;
};

// Best within-cluster sum of squares per K, together with the partitions that
// achieved them. wss[k-1] and best[k-1] belong to K = k.
struct WssCurve {
  std::size_t k_max = 0;
  std::vector<double> wss;
  std::vector<Partition> best;
};

// Multi-start Lloyd k-means on fully observed data. Each start draws K
// distinct rows (uniformly, without replacement) as initial centroids from a
// per-(K, start) substream of `seed`; the start with the lowest final WSS
// wins, ties broken toward the smaller start index. Empty clusters are
// re-seeded with the observation farthest from its assigned centroid.
Partition run_kmeans(const DataMatrix& m, std::size_t K, std::size_t n_starts,
                     std::uint64_t seed);

// k-means for incomplete data: assignment minimizes the squared distance over
// each row's observed coordinates, and the centroid update averages per
// coordinate over the rows observed there. On a fully observed mask this is
// bit-identical to run_kmeans (same code path).
Partition run_km_means(const DataMatrix& m, std::size_t K, std::size_t n_starts,
                       std::uint64_t seed);

// Single-start diagnostic: one Lloyd run whose per-iteration WSS values are
// appended to wss_history (when non-null). Each recorded value is the WSS of
// that iteration's assignment against the updated centroids.
Partition run_kmeans_single(const DataMatrix& m, std::size_t K, std::uint64_t seed,
                            std::vector<double>* wss_history);

// Jump selector: distortion d_K = WSS_K/(n*p), jump J_K = d_K^(-y) - d_{K-1}^(-y)
// with d_0^(-y) := 0; returns argmax_K J_K, ties toward smaller K. Any
// WSS_K = 0 with K < K_max short-circuits to that K (perfect fit dominates).
std::size_t select_k_jump(const WssCurve& curve, std::size_t n, std::size_t p, double y);

// Krzanowski-Lai selector: DIFF_K = (K-1)^(2/p) WSS_{K-1} - K^(2/p) WSS_K,
// KL(K) = |DIFF_K / DIFF_{K+1}| over K = 2..K_max-1; argmax, ties toward
// smaller K. K with DIFF_{K+1} = 0 are excluded.
std::size_t select_k_kl(const WssCurve& curve, std::size_t p);

struct PhaseConfig {
  std::size_t k_max = 0;      // 0 = auto: min(max(ceil(sqrt(n)), 50), n)
  std::size_t start_cap = 1000;
  double jump_y = 0.0;        // <= 0 = auto: p/2
};

enum class KSelector { jump, kl };

struct PhaseResult {
  Partition partition;           // best partition at k_hat
  WssCurve curve;
  std::size_t k_hat = 0;
  KSelector selector = KSelector::jump;
  double jump_y = 0.0;           // the y actually used (jump only)
  std::vector<double> criterion; // J_K or KL(K) per K (NaN where undefined)
};

// The k-means phase: run (k)m-means for every K = 1..K_max with
// min(n*K*p, start_cap) starts, repair any WSS non-monotonicity by re-running
// K+1 seeded from the K solution plus a split, then pick K via the KL
// criterion when n < p^2 and the jump statistic (y = p/2) otherwise.
PhaseResult kmeans_phase(const DataMatrix& m, const PhaseConfig& config,
                         std::uint64_t seed);

}  // namespace knobsync
