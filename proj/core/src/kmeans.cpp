#include "knobsync/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "internal.hpp"

namespace knobsync {

namespace {

constexpr std::size_t kMaxLloydIterations = 1000;
constexpr double kRelWssTol = 1e-12;

double sqdist_dense(const double* x, const double* c, std::size_t p) {
  double s = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double d = x[j] - c[j];
    s += d * d;
  }
  return s;
}

double sqdist_masked(const double* x, const std::uint8_t* mask, const double* c,
                     std::size_t p) {
  double s = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    if (!mask[j]) continue;
    double d = x[j] - c[j];
    s += d * d;
  }
  return s;
}

struct LloydOut {
  std::vector<int> labels;
  std::vector<double> centroids;
  double wss = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

// One Lloyd run from given initial centroids. Masked selects the
// partial-distance variant; the dense instantiation is the single code path
// shared by run_kmeans and run_km_means on fully observed data.
template <bool Masked>
LloydOut lloyd(const DataMatrix& m, std::size_t K, std::vector<double> centroids,
               std::vector<double>* wss_history) {
  const std::size_t n = m.n, p = m.p;
  LloydOut out;
  out.labels.assign(n, -1);
  std::vector<std::size_t> counts(K, 0);
  std::vector<double> sums;
  std::vector<std::size_t> coord_counts;
  if constexpr (!Masked) sums.resize(K * p);
  else {
    sums.resize(K * p);
    coord_counts.resize(K * p);
  }

  auto dist = [&](std::size_t i, const double* c) {
    if constexpr (Masked)
      return sqdist_masked(&m.values[i * p], &m.mask[i * p], c, p);
    else
      return sqdist_dense(&m.values[i * p], c, p);
  };

  double prev_wss = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 1; iter <= kMaxLloydIterations; ++iter) {
    out.iterations = iter;

    // Assignment: nearest centroid, ties toward the smaller index.
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = dist(i, &centroids[0]);
      for (std::size_t c = 1; c < K; ++c) {
        double d = dist(i, &centroids[c * p]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (out.labels[i] != best) {
        out.labels[i] = best;
        ++changed;
      }
    }

    std::fill(counts.begin(), counts.end(), 0);
    for (int l : out.labels) ++counts[static_cast<std::size_t>(l)];

    // Empty-cluster repair: re-seed each empty cluster with the observation
    // farthest from its assigned centroid (never stealing a singleton's only
    // member; a donor with two or more members always exists).
    for (std::size_t c = 0; c < K; ++c) {
      if (counts[c] != 0) continue;
      std::size_t farthest = n;
      double farthest_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t li = static_cast<std::size_t>(out.labels[i]);
        if (counts[li] <= 1) continue;
        double d = dist(i, &centroids[li * p]);
        if (d > farthest_d) {
          farthest_d = d;
          farthest = i;
        }
      }
      --counts[static_cast<std::size_t>(out.labels[farthest])];
      out.labels[farthest] = static_cast<int>(c);
      counts[c] = 1;
      ++changed;
    }

    // Update: per-cluster means; under masking each coordinate averages the
    // rows observed there, keeping its previous value when none contribute.
    if constexpr (!Masked) {
      std::fill(sums.begin(), sums.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double* s = &sums[static_cast<std::size_t>(out.labels[i]) * p];
        const double* x = &m.values[i * p];
        for (std::size_t j = 0; j < p; ++j) s[j] += x[j];
      }
      for (std::size_t c = 0; c < K; ++c)
        for (std::size_t j = 0; j < p; ++j)
          centroids[c * p + j] = sums[c * p + j] / static_cast<double>(counts[c]);
    } else {
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(coord_counts.begin(), coord_counts.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t base = static_cast<std::size_t>(out.labels[i]) * p;
        for (std::size_t j = 0; j < p; ++j) {
          if (!m.observed(i, j)) continue;
          sums[base + j] += m(i, j);
          ++coord_counts[base + j];
        }
      }
      for (std::size_t c = 0; c < K; ++c)
        for (std::size_t j = 0; j < p; ++j)
          if (coord_counts[c * p + j] > 0)
            centroids[c * p + j] =
                sums[c * p + j] / static_cast<double>(coord_counts[c * p + j]);
    }

    double wss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wss += dist(i, &centroids[static_cast<std::size_t>(out.labels[i]) * p]);
    if (wss_history) wss_history->push_back(wss);
    out.wss = wss;

    if (changed == 0) {
      out.converged = true;
      break;
    }
    if (std::isfinite(prev_wss)) {
      if (prev_wss == 0.0 || std::abs(prev_wss - wss) / prev_wss < kRelWssTol) {
        out.converged = true;
        break;
      }
    }
    prev_wss = wss;
  }

  out.centroids = std::move(centroids);
  return out;
}

// Initial centroids for one start: K distinct rows drawn uniformly without
// replacement (partial Fisher-Yates over row indices); missing coordinates of
// a seed row are completed with the global observed means.
std::vector<double> sample_centroids(const DataMatrix& m, std::size_t K,
                                     internal::SplitMix64& rng,
                                     const std::vector<double>* fill_means) {
  const std::size_t n = m.n, p = m.p;
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < K; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> centroids(K * p);
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t row = idx[c];
    for (std::size_t j = 0; j < p; ++j)
      centroids[c * p + j] =
          (!fill_means || m.observed(row, j)) ? m(row, j) : (*fill_means)[j];
  }
  return centroids;
}

Partition finish_partition(std::size_t K, LloydOut&& best) {
  Partition part;
  part.K = K;
  part.labels = std::move(best.labels);
  part.centroids = std::move(best.centroids);
  part.is_scatter.assign(K, 0);
  part.wss = best.wss;
  part.iterations = best.iterations;
  part.converged = best.converged;
  return part;
}

template <bool Masked>
Partition run_multi_start(const DataMatrix& m, std::size_t K, std::size_t n_starts,
                          std::uint64_t seed) {
  if (K == 0) throw error(errc::bad_argument, "K must be at least 1");
  if (K > m.n) throw error(errc::bad_argument, "K exceeds the number of observations");
  if (n_starts == 0) throw error(errc::bad_argument, "need at least one start");

  std::vector<double> fill_means_storage;
  const std::vector<double>* fill_means = nullptr;
  if constexpr (Masked) {
    fill_means_storage = internal::observed_column_means(m);
    fill_means = &fill_means_storage;
  }

  // Each worker keeps the best (wss, start index) over its own contiguous
  // start range; the final reduce is sequential over workers, so the winner
  // is independent of thread count.
  unsigned workers = std::min<std::size_t>(internal::thread_count(), n_starts);
  std::vector<LloydOut> local_best(workers);
  std::vector<std::size_t> local_start(workers, n_starts);

  internal::parallel_for(n_starts, [&](std::size_t begin, std::size_t end, unsigned t) {
    for (std::size_t s = begin; s < end; ++s) {
      internal::SplitMix64 rng(internal::substream_seed(seed, K, s));
      LloydOut out = lloyd<Masked>(m, K, sample_centroids(m, K, rng, fill_means), nullptr);
      if (out.wss < local_best[t].wss ||
          (out.wss == local_best[t].wss && s < local_start[t])) {
        local_best[t] = std::move(out);
        local_start[t] = s;
      }
    }
  });

  std::size_t winner = 0;
  for (std::size_t t = 1; t < local_best.size(); ++t) {
    if (local_best[t].wss < local_best[winner].wss ||
        (local_best[t].wss == local_best[winner].wss &&
         local_start[t] < local_start[winner]))
      winner = t;
  }
  if (!std::isfinite(local_best[winner].wss) && local_start[winner] == n_starts)
    throw error(errc::no_convergence, "no start produced a solution");
  return finish_partition(K, std::move(local_best[winner]));
}

}  // namespace

std::vector<std::size_t> Partition::counts() const {
  std::vector<std::size_t> c(K, 0);
  for (int l : labels) ++c[static_cast<std::size_t>(l)];
  return c;
}

Partition run_kmeans(const DataMatrix& m, std::size_t K, std::size_t n_starts,
                     std::uint64_t seed) {
  if (!m.fully_observed())
    throw error(errc::bad_argument, "run_kmeans requires fully observed data");
  return run_multi_start<false>(m, K, n_starts, seed);
}

Partition run_km_means(const DataMatrix& m, std::size_t K, std::size_t n_starts,
                       std::uint64_t seed) {
  if (m.fully_observed()) return run_multi_start<false>(m, K, n_starts, seed);
  return run_multi_start<true>(m, K, n_starts, seed);
}

Partition run_kmeans_single(const DataMatrix& m, std::size_t K, std::uint64_t seed,
                            std::vector<double>* wss_history) {
  if (K == 0) throw error(errc::bad_argument, "K must be at least 1");
  if (K > m.n) throw error(errc::bad_argument, "K exceeds the number of observations");
  internal::SplitMix64 rng(internal::substream_seed(seed, K, 0));
  if (m.fully_observed()) {
    LloydOut out = lloyd<false>(m, K, sample_centroids(m, K, rng, nullptr), wss_history);
    return finish_partition(K, std::move(out));
  }
  std::vector<double> means = internal::observed_column_means(m);
  LloydOut out = lloyd<true>(m, K, sample_centroids(m, K, rng, &means), wss_history);
  return finish_partition(K, std::move(out));
}

namespace {

// Shared by the selector and the phase report: J_K values (jump) and KL(K)
// values, NaN where undefined.
std::vector<double> jump_values(const WssCurve& curve, std::size_t n, std::size_t p,
                                double y) {
  const double np = static_cast<double>(n) * static_cast<double>(p);
  std::vector<double> j(curve.k_max, std::numeric_limits<double>::quiet_NaN());
  double prev_pow = 0.0;  // d_0^(-y) := 0
  for (std::size_t k = 1; k <= curve.k_max; ++k) {
    double d = curve.wss[k - 1] / np;
    double cur_pow = std::pow(d, -y);
    j[k - 1] = cur_pow - prev_pow;
    prev_pow = cur_pow;
  }
  return j;
}

std::vector<double> kl_values(const WssCurve& curve, std::size_t p) {
  std::vector<double> kl(curve.k_max, std::numeric_limits<double>::quiet_NaN());
  if (curve.k_max < 3) return kl;
  auto diff = [&](std::size_t k) {  // DIFF_K for K in 2..k_max
    double e = 2.0 / static_cast<double>(p);
    return std::pow(static_cast<double>(k - 1), e) * curve.wss[k - 2] -
           std::pow(static_cast<double>(k), e) * curve.wss[k - 1];
  };
  for (std::size_t k = 2; k + 1 <= curve.k_max; ++k) {
    double next = diff(k + 1);
    if (next == 0.0) continue;  // excluded: infinite ratio treated as invalid
    kl[k - 1] = std::abs(diff(k) / next);
  }
  return kl;
}

}  // namespace

std::size_t select_k_jump(const WssCurve& curve, std::size_t n, std::size_t p,
                          double y) {
  if (curve.k_max == 0 || curve.wss.size() != curve.k_max)
    throw error(errc::bad_argument, "WSS curve is empty or inconsistent");
  if (!(y > 0.0)) throw error(errc::bad_argument, "jump exponent y must be positive");

  // A perfect fit before K_max dominates: return the first such K directly.
  for (std::size_t k = 1; k < curve.k_max; ++k)
    if (curve.wss[k - 1] == 0.0) return k;

  std::vector<double> j = jump_values(curve, n, p, y);
  std::size_t best = 1;
  for (std::size_t k = 2; k <= curve.k_max; ++k)
    if (j[k - 1] > j[best - 1]) best = k;
  return best;
}

std::size_t select_k_kl(const WssCurve& curve, std::size_t p) {
  if (curve.k_max < 3)
    throw error(errc::bad_argument, "KL criterion needs K_max >= 3");
  if (curve.wss.size() != curve.k_max)
    throw error(errc::bad_argument, "WSS curve is inconsistent");

  std::vector<double> kl = kl_values(curve, p);
  std::size_t best = 0;
  for (std::size_t k = 2; k + 1 <= curve.k_max; ++k) {
    if (std::isnan(kl[k - 1])) continue;
    if (best == 0 || kl[k - 1] > kl[best - 1]) best = k;
  }
  if (best == 0)
    throw error(errc::degenerate, "KL criterion undefined for every candidate K");
  return best;
}

PhaseResult kmeans_phase(const DataMatrix& m, const PhaseConfig& config,
                         std::uint64_t seed) {
  const std::size_t n = m.n, p = m.p;
  if (n == 0 || p == 0) throw error(errc::degenerate, "empty data matrix");

  std::size_t k_max = config.k_max;
  if (k_max == 0)
    k_max = std::max<std::size_t>(
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)))), 50);
  k_max = std::min(k_max, n);

  const bool masked = !m.fully_observed();

  WssCurve curve;
  curve.k_max = k_max;
  curve.wss.resize(k_max);
  curve.best.resize(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::size_t starts = std::min<std::size_t>(n * k * p, config.start_cap);
    if (starts == 0) starts = 1;
    curve.best[k - 1] = masked ? run_km_means(m, k, starts, seed)
                               : run_kmeans(m, k, starts, seed);
    curve.wss[k - 1] = curve.best[k - 1].wss;
  }

  // Monotone repair: when WSS_{K+1} exceeds WSS_K, re-run K+1 once from the
  // K solution's centroids plus the observation farthest from its assigned
  // centroid; the first assignment then cannot exceed WSS_K.
  for (std::size_t k = 1; k < k_max; ++k) {
    if (curve.wss[k] <= curve.wss[k - 1]) continue;
    const Partition& donor = curve.best[k - 1];
    std::size_t farthest = 0;
    double farthest_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* c = &donor.centroids[static_cast<std::size_t>(donor.labels[i]) * p];
      double d = masked ? sqdist_masked(&m.values[i * p], &m.mask[i * p], c, p)
                        : sqdist_dense(&m.values[i * p], c, p);
      if (d > farthest_d) {
        farthest_d = d;
        farthest = i;
      }
    }
    std::vector<double> init = donor.centroids;
    init.resize((k + 1) * p);
    std::vector<double> means;
    if (masked) means = internal::observed_column_means(m);
    for (std::size_t j = 0; j < p; ++j)
      init[k * p + j] =
          (!masked || m.observed(farthest, j)) ? m(farthest, j) : means[j];
    LloydOut repaired = masked ? lloyd<true>(m, k + 1, std::move(init), nullptr)
                               : lloyd<false>(m, k + 1, std::move(init), nullptr);
    if (repaired.wss < curve.wss[k]) {
      curve.best[k] = finish_partition(k + 1, std::move(repaired));
      curve.wss[k] = curve.best[k].wss;
    }
  }

  PhaseResult result;
  result.curve = std::move(curve);
  if (n < p * p) {
    result.selector = KSelector::kl;
    result.k_hat = select_k_kl(result.curve, p);
    result.criterion = kl_values(result.curve, p);
  } else {
    result.selector = KSelector::jump;
    result.jump_y = config.jump_y > 0.0 ? config.jump_y
                                        : static_cast<double>(p) / 2.0;
    result.k_hat = select_k_jump(result.curve, n, p, result.jump_y);
    result.criterion = jump_values(result.curve, n, p, result.jump_y);
  }
  result.partition = result.curve.best[result.k_hat - 1];
  return result;
}

}  // namespace knobsync
