#include "knobsync/knobsync.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "internal.hpp"

namespace knobsync {

namespace {

constexpr double kOmegaTol = 1e-5;

// Minimal union-find over group indices; roots are always the smallest index
// of their component, which keeps compaction ordered by smallest member.
struct DisjointSet {
  std::vector<int> parent;

  explicit DisjointSet(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
  }
};

struct MergeStep {
  ClusterForest forest;
  std::vector<std::pair<int, int>> pairs;  // qualifying old-group pairs
  std::vector<int> new_from_old;           // old index when a new group is unchanged, else -1
};

// One merge round: collect every pair at the maximum (exact float equality;
// both values come from the same array) or above the kappa threshold, then
// coalesce transitively. New groups are ordered by their smallest sub-cluster
// member, which is the union-find root order because the incoming groups held
// that invariant themselves.
MergeStep merge_groups(const ClusterForest& forest, const OverlapMatrix& om,
                       double threshold, double omega_max) {
  const std::size_t G = forest.size();
  DisjointSet ds(G);
  MergeStep step;
  for (std::size_t k = 0; k + 1 < G; ++k)
    for (std::size_t l = k + 1; l < G; ++l) {
      double v = om.at(k, l);
      if (v == omega_max || v > threshold) {
        step.pairs.emplace_back(static_cast<int>(k), static_cast<int>(l));
        ds.unite(static_cast<int>(k), static_cast<int>(l));
      }
    }
  if (step.pairs.empty())
    throw error(errc::degenerate, "merge round found no qualifying pair");

  std::vector<int> root_new(G, -1);
  std::vector<int> root_count(G, 0);
  int next = 0;
  for (std::size_t g = 0; g < G; ++g) {
    int r = ds.find(static_cast<int>(g));
    if (root_new[static_cast<std::size_t>(r)] < 0)
      root_new[static_cast<std::size_t>(r)] = next++;
    ++root_count[static_cast<std::size_t>(r)];
  }

  step.forest.groups.resize(static_cast<std::size_t>(next));
  step.forest.group_of.resize(forest.sub_cluster_count());
  step.new_from_old.assign(static_cast<std::size_t>(next), -1);
  for (std::size_t g = 0; g < G; ++g) {
    int r = ds.find(static_cast<int>(g));
    int ng = root_new[static_cast<std::size_t>(r)];
    auto& subs = step.forest.groups[static_cast<std::size_t>(ng)];
    subs.insert(subs.end(), forest.groups[g].begin(), forest.groups[g].end());
    if (root_count[static_cast<std::size_t>(r)] == 1)
      step.new_from_old[static_cast<std::size_t>(ng)] = static_cast<int>(g);
  }
  for (std::size_t ng = 0; ng < step.forest.groups.size(); ++ng) {
    auto& subs = step.forest.groups[ng];
    std::sort(subs.begin(), subs.end());
    for (int sub : subs) step.forest.group_of[static_cast<std::size_t>(sub)] = static_cast<int>(ng);
  }
  return step;
}

// Post-merge matrix: entries between two untouched groups are copied from the
// previous matrix; anything involving a freshly merged group is recomputed.
OverlapMatrix updated_matrix(const OverlapContext& ctx, const MergeStep& step,
                             const OverlapMatrix& old_om) {
  const std::size_t G = step.forest.size();
  OverlapMatrix om;
  om.K = G;
  om.a.assign(G * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) om.at(g, g) = 1.0;

  std::vector<std::pair<std::size_t, std::size_t>> recompute;
  for (std::size_t k = 0; k + 1 < G; ++k)
    for (std::size_t l = k + 1; l < G; ++l) {
      int ok = step.new_from_old[k], ol = step.new_from_old[l];
      if (ok >= 0 && ol >= 0) {
        double v = old_om.at(static_cast<std::size_t>(ok), static_cast<std::size_t>(ol));
        om.at(k, l) = v;
        om.at(l, k) = v;
      } else {
        recompute.emplace_back(k, l);
      }
    }

  internal::parallel_for(recompute.size(), [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      auto [k, l] = recompute[idx];
      PairOverlap o =
          composite_overlap_ctx(ctx, step.forest.groups[k], step.forest.groups[l]);
      om.at(k, l) = o.total;
      om.at(l, k) = o.total;
    }
  });
  return om;
}

// Deterministic content hash over rows in their current order (mask byte,
// then the value bits of each observed cell), splitmix-mixed per word.
std::uint64_t content_hash(const DataMatrix& m) {
  internal::SplitMix64 h(0x9e3779b97f4a7c15ULL);
  auto absorb = [&h](std::uint64_t x) {
    h.state ^= x;
    (void)h.next();
  };
  absorb(m.n);
  absorb(m.p);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.p; ++j) {
      absorb(m.mask[i * m.p + j]);
      if (m.observed(i, j)) absorb(std::bit_cast<std::uint64_t>(m(i, j)));
    }
  return h.state;
}

// Lexicographic row order: unobserved sorts before observed per coordinate,
// then by value; identical rows keep their relative order (they always end
// up with identical labels, so stability cannot break permutation invariance).
std::vector<std::size_t> canonical_order(const DataMatrix& m) {
  std::vector<std::size_t> order(m.n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&m](std::size_t a, std::size_t b) {
    for (std::size_t j = 0; j < m.p; ++j) {
      bool oa = m.observed(a, j), ob = m.observed(b, j);
      if (oa != ob) return oa < ob;
      if (oa && m(a, j) != m(b, j)) return m(a, j) < m(b, j);
    }
    return false;
  });
  return order;
}

KnobSyncResult finish_from_partition(const DataMatrix& m, Partition part,
                                     const KnobSyncConfig& config) {
  if (config.kappas.empty())
    throw error(errc::bad_argument, "kappa sweep must not be empty");

  KnobSyncResult res;
  res.cdf = make_residual_cdf(normed_residuals(m, part));
  res.kmeans_partition = std::move(part);

  OverlapContext ctx = make_overlap_context(res.cdf, m, res.kmeans_partition);
  res.initial_matrix = overlap_matrix_ctx(ctx, singleton_forest(res.kmeans_partition.K));
  res.initial_omega_gen = generalized_overlap(res.initial_matrix);
  res.initial_omega_max = max_overlap(res.initial_matrix).value;

  std::vector<MergeResult> merges;
  merges.reserve(config.kappas.size());
  for (double kappa : config.kappas) {
    merges.push_back(run_merging(ctx, kappa, config.trigger, &res.initial_matrix));
    res.traces.push_back(merges.back().trace);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < merges.size(); ++i) {
    double a = merges[i].trace.terminal_omega_gen;
    double b = merges[best].trace.terminal_omega_gen;
    if (a < b || (a == b && config.kappas[i] < config.kappas[best])) best = i;
  }
  res.best_trace = best;
  res.forest = std::move(merges[best].forest);
  res.final_matrix = std::move(merges[best].final_matrix);
  res.labels.resize(m.n);
  for (std::size_t i = 0; i < m.n; ++i)
    res.labels[i] =
        res.forest.group_of[static_cast<std::size_t>(res.kmeans_partition.labels[i])];
  res.n_clusters = res.forest.size();
  return res;
}

KnobSyncResult run_pipeline(const DataMatrix& m, const KnobSyncConfig& config,
                            std::uint64_t seed) {
  PhaseResult phase = kmeans_phase(m, config.phase, seed);
  KnobSyncResult res = finish_from_partition(m, std::move(phase.partition), config);
  res.curve = std::move(phase.curve);
  res.selector = phase.selector;
  res.jump_y = phase.jump_y;
  res.criterion = std::move(phase.criterion);
  return res;
}

}  // namespace

std::string to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::omega_zero: return "omega_zero";
    case TerminalReason::omega_increased: return "omega_increased";
    case TerminalReason::omega_equals_max: return "omega_equals_max";
    case TerminalReason::no_trigger: return "no_trigger";
  }
  return "unknown";
}

bool merging_triggered(double omega_gen, double omega_max, TriggerVariant v) {
  if (v == TriggerVariant::printed)
    return !(omega_gen >= 4.0 * omega_max) || (omega_gen >= kOmegaTol);
  return (omega_max >= 4.0 * omega_gen) || (omega_gen >= kOmegaTol);
}

MergeResult run_merging(const OverlapContext& ctx, double kappa, TriggerVariant v,
                        const OverlapMatrix* initial_matrix) {
  MergeResult res;
  res.trace.kappa = kappa;
  res.forest = singleton_forest(ctx.K);
  res.final_matrix =
      initial_matrix ? *initial_matrix : overlap_matrix_ctx(ctx, res.forest);

  double og = generalized_overlap(res.final_matrix);
  MaxOverlap mx = max_overlap(res.final_matrix);
  res.trace.triggered = ctx.K >= 2 && merging_triggered(og, mx.value, v);
  if (!res.trace.triggered) {
    res.trace.reason = TerminalReason::no_trigger;
    res.trace.terminal_omega_gen = og;
    res.trace.terminal_omega_max = mx.value;
    return res;
  }

  int ell = 0;
  while (res.forest.size() >= 2) {
    double threshold = std::isinf(kappa)
                           ? std::numeric_limits<double>::infinity()
                           : kappa * og;
    MergeStep step = merge_groups(res.forest, res.final_matrix, threshold, mx.value);
    OverlapMatrix new_om = updated_matrix(ctx, step, res.final_matrix);
    double new_og = generalized_overlap(new_om);

    MergeIteration it;
    it.ell = ++ell;
    it.k_before = res.forest.size();
    it.k_after = step.forest.size();
    it.omega_max_before = mx.value;
    it.omega_gen_before = og;
    it.omega_gen_after = new_og;
    it.merged_pairs = step.pairs;

    // Termination order matters: a merge that fails to lower the generalized
    // overlap by more than the tolerance is rolled back even if it reaches
    // zero (merging everything trivially zeroes the overlap).
    if (new_og > og - kOmegaTol) {
      it.rolled_back = true;
      res.trace.iterations.push_back(it);
      res.trace.reason = TerminalReason::omega_increased;
      break;
    }

    res.forest = std::move(step.forest);
    res.final_matrix = std::move(new_om);
    og = new_og;
    mx = max_overlap(res.final_matrix);
    res.trace.iterations.push_back(it);

    if (og <= kOmegaTol) {
      res.trace.reason = TerminalReason::omega_zero;
      break;
    }
    if (std::abs(og - mx.value) <= kOmegaTol) {
      res.trace.reason = TerminalReason::omega_equals_max;
      break;
    }
  }

  res.trace.terminal_omega_gen = og;
  res.trace.terminal_omega_max = mx.value;
  return res;
}

KnobSyncResult run_knobsync(const DataMatrix& m, const KnobSyncConfig& config,
                            std::uint64_t seed) {
  if (!config.permutation_invariant_seeding) return run_pipeline(m, config, seed);

  // Canonical mode: run everything on the lexicographically sorted rows with
  // a content-derived seed, then map the labels back to the input order.
  std::vector<std::size_t> order = canonical_order(m);
  DataMatrix pm;
  pm.n = m.n;
  pm.p = m.p;
  pm.feature_names = m.feature_names;
  pm.values.resize(m.n * m.p);
  pm.mask.resize(m.n * m.p);
  for (std::size_t c = 0; c < m.n; ++c) {
    std::copy_n(&m.values[order[c] * m.p], m.p, &pm.values[c * m.p]);
    std::copy_n(&m.mask[order[c] * m.p], m.p, &pm.mask[c * m.p]);
  }

  internal::SplitMix64 mix(seed ^ content_hash(pm));
  KnobSyncResult res = run_pipeline(pm, config, mix.next());

  auto map_back = [&order, &m](std::vector<int>& labels) {
    std::vector<int> raw(m.n);
    for (std::size_t c = 0; c < m.n; ++c) raw[order[c]] = labels[c];
    labels = std::move(raw);
  };
  map_back(res.labels);
  map_back(res.kmeans_partition.labels);
  for (Partition& part : res.curve.best) map_back(part.labels);
  return res;
}

KnobSyncResult run_knobsync_on_partition(const DataMatrix& m, const Partition& part,
                                         const KnobSyncConfig& config) {
  return finish_from_partition(m, part, config);
}

Partition ingest_partition(const DataMatrix& m, const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& scatter_flags) {
  if (labels.size() != m.n || scatter_flags.size() != m.n)
    throw error(errc::bad_argument, "labels/scatter flags must have one entry per row");
  if (m.n == 0) throw error(errc::degenerate, "empty data matrix");

  Partition part;
  std::map<int, int> cluster_of;
  part.labels.resize(m.n);
  for (std::size_t i = 0; i < m.n; ++i) {
    auto [it, inserted] = cluster_of.emplace(labels[i], static_cast<int>(part.K));
    if (inserted) ++part.K;
    part.labels[i] = it->second;
  }

  std::vector<std::size_t> counts(part.K, 0);
  for (int l : part.labels) ++counts[static_cast<std::size_t>(l)];
  part.is_scatter.assign(part.K, 0);
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!scatter_flags[i]) continue;
    std::size_t c = static_cast<std::size_t>(part.labels[i]);
    if (counts[c] != 1)
      throw error(errc::bad_argument,
                  "row " + std::to_string(i) + " is flagged scatter but shares its label");
    part.is_scatter[c] = 1;
  }

  // Centroids: per-cluster observed means; a coordinate nobody in the cluster
  // observes falls back to the global observed mean (same completion rule as
  // the k-means seeding).
  const std::size_t p = m.p;
  part.centroids.assign(part.K * p, 0.0);
  std::vector<std::size_t> coord_counts(part.K * p, 0);
  for (std::size_t i = 0; i < m.n; ++i) {
    std::size_t base = static_cast<std::size_t>(part.labels[i]) * p;
    for (std::size_t j = 0; j < p; ++j) {
      if (!m.observed(i, j)) continue;
      part.centroids[base + j] += m(i, j);
      ++coord_counts[base + j];
    }
  }
  std::vector<double> global_means;
  for (std::size_t c = 0; c < part.K; ++c)
    for (std::size_t j = 0; j < p; ++j) {
      if (coord_counts[c * p + j] > 0) {
        part.centroids[c * p + j] /= static_cast<double>(coord_counts[c * p + j]);
      } else {
        if (global_means.empty()) global_means = internal::observed_column_means(m);
        part.centroids[c * p + j] = global_means[j];
      }
    }

  part.wss = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double* c = &part.centroids[static_cast<std::size_t>(part.labels[i]) * p];
    for (std::size_t j = 0; j < p; ++j) {
      if (!m.observed(i, j)) continue;
      double d = m(i, j) - c[j];
      part.wss += d * d;
    }
  }
  part.iterations = 0;
  part.converged = true;
  return part;
}

}  // namespace knobsync
