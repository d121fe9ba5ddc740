#include "knobsync/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "internal.hpp"

namespace knobsync {

namespace {

// Missing-rescaled distance from row i to an arbitrary centroid vector:
// sqrt((p / p_i) * sum over observed j of (x_ij - c_j)^2). Fully observed
// rows reduce to the plain Euclidean norm (p_i = p makes the factor 1).
double rescaled_distance(const DataMatrix& m, std::size_t i, const double* c) {
  const std::size_t p = m.p;
  double ss = 0.0;
  std::size_t observed = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (!m.observed(i, j)) continue;
    double d = m(i, j) - c[j];
    ss += d * d;
    ++observed;
  }
  if (observed == p) return std::sqrt(ss);
  return std::sqrt(static_cast<double>(p) / static_cast<double>(observed) * ss);
}

// Rows of a group in ascending row order (the summation order shared by the
// pairwise and composite paths).
std::vector<int> group_rows(const std::vector<std::vector<int>>& members,
                            const std::vector<int>& group) {
  std::vector<int> rows;
  for (int sub : group)
    rows.insert(rows.end(), members[static_cast<std::size_t>(sub)].begin(),
                members[static_cast<std::size_t>(sub)].end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

// One directed conditional: [1 - mean over conditioning rows of
// H(min distance to the target group's centroids)] ^ exponent, the base
// clamped into [0, 1] and the power skipped for singleton groups so that the
// pairwise and composite paths agree bit for bit.
double one_sided(const ResidualCdf& cdf, const std::vector<int>& rows,
                 const double* dist_row_base, std::size_t stride,
                 const std::vector<int>& target_subs, std::size_t exponent) {
  double sum = 0.0;
  for (int i : rows) {
    const double* d = dist_row_base + static_cast<std::size_t>(i) * stride;
    double y = d[static_cast<std::size_t>(target_subs.front())];
    for (std::size_t t = 1; t < target_subs.size(); ++t)
      y = std::min(y, d[static_cast<std::size_t>(target_subs[t])]);
    sum += cdf_eval(cdf, y);
  }
  double base = 1.0 - sum / static_cast<double>(rows.size());
  base = std::clamp(base, 0.0, 1.0);
  if (exponent == 1) return base;
  return std::pow(base, static_cast<double>(exponent));
}

}  // namespace

std::vector<double> normed_residuals(const DataMatrix& m, const Partition& part) {
  std::vector<double> r(m.n);
  for (std::size_t i = 0; i < m.n; ++i)
    r[i] = rescaled_distance(
        m, i, &part.centroids[static_cast<std::size_t>(part.labels[i]) * m.p]);
  return r;
}

double residual_to_centroid(const DataMatrix& m, std::size_t i,
                            const Partition& part, int c) {
  return rescaled_distance(m, i, &part.centroids[static_cast<std::size_t>(c) * m.p]);
}

double pseudo_residual(const DataMatrix& m, std::size_t i, const Partition& part,
                       const std::vector<int>& targets) {
  if (targets.empty()) throw error(errc::bad_argument, "empty target set");
  double best = residual_to_centroid(m, i, part, targets.front());
  for (std::size_t t = 1; t < targets.size(); ++t)
    best = std::min(best, residual_to_centroid(m, i, part, targets[t]));
  return best;
}

ClusterForest singleton_forest(std::size_t K) {
  ClusterForest forest;
  forest.groups.resize(K);
  forest.group_of.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    forest.groups[k] = {static_cast<int>(k)};
    forest.group_of[k] = static_cast<int>(k);
  }
  return forest;
}

OverlapContext make_overlap_context(const ResidualCdf& cdf, const DataMatrix& m,
                                    const Partition& part) {
  OverlapContext ctx;
  ctx.cdf = &cdf;
  ctx.n = m.n;
  ctx.K = part.K;
  ctx.dist.resize(m.n * part.K);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t c = 0; c < part.K; ++c)
      ctx.dist[i * part.K + c] = rescaled_distance(m, i, &part.centroids[c * m.p]);
  ctx.members.resize(part.K);
  for (std::size_t i = 0; i < m.n; ++i)
    ctx.members[static_cast<std::size_t>(part.labels[i])].push_back(
        static_cast<int>(i));
  return ctx;
}

PairOverlap composite_overlap_ctx(const OverlapContext& ctx,
                                  const std::vector<int>& group_k,
                                  const std::vector<int>& group_l) {
  std::vector<int> rows_k = group_rows(ctx.members, group_k);
  std::vector<int> rows_l = group_rows(ctx.members, group_l);
  if (rows_k.empty() || rows_l.empty())
    throw error(errc::bad_argument, "overlap between empty groups");

  PairOverlap o;
  o.l_given_k =
      one_sided(*ctx.cdf, rows_k, ctx.dist.data(), ctx.K, group_l, group_k.size());
  o.k_given_l =
      one_sided(*ctx.cdf, rows_l, ctx.dist.data(), ctx.K, group_k, group_l.size());
  o.total = o.l_given_k + o.k_given_l;
  return o;
}

PairOverlap pairwise_overlap(const ResidualCdf& cdf, const DataMatrix& m,
                             const Partition& part, int k, int l) {
  if (k == l) throw error(errc::bad_argument, "overlap needs two distinct clusters");
  OverlapContext ctx = make_overlap_context(cdf, m, part);
  return composite_overlap_ctx(ctx, {k}, {l});
}

PairOverlap composite_overlap(const ResidualCdf& cdf, const DataMatrix& m,
                              const Partition& part, const ClusterForest& forest,
                              int gk, int gl) {
  if (gk == gl) throw error(errc::bad_argument, "overlap needs two distinct groups");
  OverlapContext ctx = make_overlap_context(cdf, m, part);
  return composite_overlap_ctx(ctx, forest.groups[static_cast<std::size_t>(gk)],
                               forest.groups[static_cast<std::size_t>(gl)]);
}

OverlapMatrix overlap_matrix_ctx(const OverlapContext& ctx, const ClusterForest& forest) {
  const std::size_t G = forest.size();
  OverlapMatrix om;
  om.K = G;
  om.a.assign(G * G, 0.0);
  for (std::size_t g = 0; g < G; ++g) om.at(g, g) = 1.0;

  // All unordered pairs, flattened so the work parallelizes evenly; each pair
  // writes only its own two symmetric slots.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(G * (G - 1) / 2);
  for (std::size_t k = 0; k + 1 < G; ++k)
    for (std::size_t l = k + 1; l < G; ++l) pairs.emplace_back(k, l);

  internal::parallel_for(pairs.size(), [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      auto [k, l] = pairs[idx];
      PairOverlap o = composite_overlap_ctx(ctx, forest.groups[k], forest.groups[l]);
      om.at(k, l) = o.total;
      om.at(l, k) = o.total;
    }
  });
  return om;
}

OverlapMatrix overlap_matrix(const ResidualCdf& cdf, const DataMatrix& m,
                             const Partition& part, const ClusterForest& forest) {
  OverlapContext ctx = make_overlap_context(cdf, m, part);
  return overlap_matrix_ctx(ctx, forest);
}

double symmetric_dominant_eigenvalue(const std::vector<double>& a, std::size_t K) {
  if (K == 0 || a.size() != K * K)
    throw error(errc::bad_argument, "matrix size mismatch");
  if (K == 1) return a[0];

  std::vector<double> v(K, 1.0 / std::sqrt(static_cast<double>(K)));
  std::vector<double> w(K);
  double lambda = 0.0;
  constexpr std::size_t kMaxIter = 100000;
  for (std::size_t iter = 0; iter < kMaxIter; ++iter) {
    for (std::size_t r = 0; r < K; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < K; ++c) s += a[r * K + c] * v[c];
      w[r] = s;
    }
    // Rayleigh quotient with ||v|| = 1.
    double next = 0.0;
    for (std::size_t r = 0; r < K; ++r) next += v[r] * w[r];

    // Converge on the eigen-residual ||Av - lambda v||: for a symmetric matrix
    // it bounds the distance from `next` to a true eigenvalue, and unlike the
    // change in successive Rayleigh quotients it does not stall when the
    // dominant eigenvalue is nearly degenerate (the iterate then keeps
    // rotating inside the dominant eigenspace while every direction in that
    // space already yields the same eigenvalue to the accuracy we report).
    double resid = 0.0;
    for (std::size_t r = 0; r < K; ++r) {
      double d = w[r] - next * v[r];
      resid += d * d;
    }
    resid = std::sqrt(resid);

    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;  // iterate annihilated: zero matrix direction
    for (std::size_t r = 0; r < K; ++r) v[r] = w[r] / norm;

    if (resid <= 1e-9 * std::max(1.0, std::abs(next))) return next;
    if (iter > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) return next;
    lambda = next;
  }
  // When much of the spectrum is packed within ~1e-3 of the diagonal (a
  // near-identity overlap matrix after heavy merging), neither test can fire
  // inside the iteration budget. The Rayleigh quotient is then already within
  // that packing width of the true maximum, which is far tighter than any
  // decision made downstream, so the final estimate is the right answer
  // rather than an error.
  return lambda;
}

double generalized_overlap(const OverlapMatrix& om) {
  if (om.K <= 1) return 0.0;
  double lambda = symmetric_dominant_eigenvalue(om.a, om.K);
  return std::max(0.0, (lambda - 1.0) / static_cast<double>(om.K - 1));
}

MaxOverlap max_overlap(const OverlapMatrix& om) {
  MaxOverlap best;
  for (std::size_t k = 0; k + 1 < om.K; ++k)
    for (std::size_t l = k + 1; l < om.K; ++l)
      if (om.at(k, l) > best.value) {
        best.value = om.at(k, l);
        best.k = static_cast<int>(k);
        best.l = static_cast<int>(l);
      }
  return best;
}

}  // namespace knobsync
