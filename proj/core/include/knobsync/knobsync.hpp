#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "knobsync/data.hpp"
#include "knobsync/kernelcdf.hpp"
#include "knobsync/kmeans.hpp"
#include "knobsync/overlap.hpp"

namespace knobsync {

// Why the merge loop stopped at a given kappa.
enum class TerminalReason {
  omega_zero,        // generalized overlap fell to <= 1e-5
  omega_increased,   // merge failed to lower it by > 1e-5; rolled back
  omega_equals_max,  // generalized and maximum overlap agree within 1e-5
  no_trigger,        // the start condition never fired; k-means solution kept
};

std::string to_string(TerminalReason r);

// Which form of the start condition to use. The printed form is
//   !(omega_gen >= 4 * omega_max) || (omega_gen >= 1e-5)
// and the transposed option swaps the two statistics in the first clause:
//   (omega_max >= 4 * omega_gen) || (omega_gen >= 1e-5)
enum class TriggerVariant { printed, transposed };

bool merging_triggered(double omega_gen, double omega_max, TriggerVariant v);

// One round of the merge loop, recorded before/after the merge it performed.
struct MergeIteration {
  int ell = 0;                                   // 1-based iteration index
  std::size_t k_before = 0;                      // groups entering the round
  std::size_t k_after = 0;                       // groups after merging
  double omega_max_before = 0.0;                 // max overlap driving the merge
  double omega_gen_before = 0.0;                 // generalized overlap before
  double omega_gen_after = 0.0;                  // generalized overlap after
  std::vector<std::pair<int, int>> merged_pairs; // group index pairs merged
  bool rolled_back = false;                      // merge undone by the guard
};

struct MergeTrace {
  double kappa = 0.0;  // +inf for the unconditional-merge setting
  bool triggered = false;
  std::vector<MergeIteration> iterations;
  TerminalReason reason = TerminalReason::no_trigger;
  double terminal_omega_gen = 0.0;
  double terminal_omega_max = 0.0;
};

struct MergeResult {
  ClusterForest forest;
  MergeTrace trace;
  OverlapMatrix final_matrix;
};

// Run the merge loop for one kappa over the fixed sub-cluster partition.
// The kernel CDF and centroids never change; only group memberships evolve.
// A precomputed all-singleton overlap matrix may be passed to share the
// starting point across the kappa sweep.
MergeResult run_merging(const OverlapContext& ctx, double kappa, TriggerVariant v,
                        const OverlapMatrix* initial_matrix = nullptr);

struct KnobSyncConfig {
  PhaseConfig phase;
  std::vector<double> kappas = {1.0, 2.0, 3.0, 4.0, 5.0,
                                std::numeric_limits<double>::infinity()};
  TriggerVariant trigger = TriggerVariant::printed;
  // When set, rows are canonically ordered before seeding so the result is
  // invariant to input row permutation; labels are mapped back afterwards.
  bool permutation_invariant_seeding = false;
};

struct KnobSyncResult {
  Partition kmeans_partition;       // the K-hat sub-cluster solution
  WssCurve curve;
  KSelector selector = KSelector::jump;
  double jump_y = 0.0;
  std::vector<double> criterion;    // selector values per K (NaN = undefined)
  ResidualCdf cdf;                  // kernel CDF of the k-means residuals
  OverlapMatrix initial_matrix;     // sub-cluster overlap map
  double initial_omega_gen = 0.0;
  double initial_omega_max = 0.0;
  std::vector<MergeTrace> traces;   // one per kappa, in config order
  std::size_t best_trace = 0;       // winner: smallest terminal omega_gen
  ClusterForest forest;             // winning group structure
  OverlapMatrix final_matrix;       // overlap map of the winning groups
  std::vector<int> labels;          // final group label per row
  std::size_t n_clusters = 0;
};

// Full pipeline: k-means phase, residual CDF, overlap map, merge sweep.
KnobSyncResult run_knobsync(const DataMatrix& m, const KnobSyncConfig& config,
                            std::uint64_t seed);

// Merging stages only, on an already-built sub-cluster partition (no k-means
// phase; the WSS curve in the result is left empty).
KnobSyncResult run_knobsync_on_partition(const DataMatrix& m, const Partition& part,
                                         const KnobSyncConfig& config);

// Build a Partition from externally supplied labels (any integers; remapped
// by first appearance) plus per-row scatter flags. A scatter row becomes its
// own singleton sub-cluster with itself as centroid; other centroids are
// per-label observed means. The result is ready for the merging stages.
Partition ingest_partition(const DataMatrix& m, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& scatter_flags);

}  // namespace knobsync
