#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "knobsync/data.hpp"

namespace knobsync::internal {

// splitmix64: tiny, fast, and with the mixing quality needed to derive
// independent substreams from (seed, stream) pairs.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Lemire's unbiased bounded sampling: uniform draw in [0, bound). Owned
  // here because std::uniform_int_distribution is not pinned across standard
  // library implementations, and reproducibility is part of the contract.
  std::uint64_t next_below(std::uint64_t bound) {
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    std::uint64_t l = static_cast<std::uint64_t>(m);
    if (l < bound) {
      std::uint64_t t = (0 - bound) % bound;
      while (l < t) {
        x = next();
        m = static_cast<__uint128_t>(x) * bound;
        l = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }
};

// Substream seed for a (K, start) pair: disjoint by construction, then mixed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t k,
                                    std::uint64_t start) {
  SplitMix64 mix(seed ^ (k * 0x100000000ULL + start));
  return mix.next();
}

// Per-coordinate means over observed cells; errors on a feature nobody
// observes. Used to complete missing coordinates of seed rows and centroids.
inline std::vector<double> observed_column_means(const DataMatrix& m) {
  std::vector<double> mean(m.p, 0.0);
  std::vector<std::size_t> count(m.p, 0);
  for (std::size_t i = 0; i < m.n; ++i)
    for (std::size_t j = 0; j < m.p; ++j)
      if (m.observed(i, j)) {
        mean[j] += m(i, j);
        ++count[j];
      }
  for (std::size_t j = 0; j < m.p; ++j) {
    if (count[j] == 0)
      throw error(errc::degenerate,
                  "feature " + std::to_string(j) + " has no observed values");
    mean[j] /= static_cast<double>(count[j]);
  }
  return mean;
}

// Worker count: KNOBSYNC_THREADS when set and positive, else hardware
// concurrency, floored at 1.
inline unsigned thread_count() {
  if (const char* env = std::getenv("KNOBSYNC_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

// Static block partition of [0, count) across threads. The body receives
// (begin, end, thread_index); results must be written to disjoint slots so
// reductions stay deterministic regardless of scheduling.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t, std::size_t, unsigned)>& body) {
  unsigned workers = thread_count();
  if (workers <= 1 || count <= 1) {
    body(0, count, 0);
    return;
  }
  if (workers > count) workers = static_cast<unsigned>(count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t begin = static_cast<std::size_t>(t) * chunk;
    std::size_t end = begin + chunk < count ? begin + chunk : count;
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end, t] { body(begin, end, t); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace knobsync::internal
