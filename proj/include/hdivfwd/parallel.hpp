#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace hdivfwd {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> value{0};
  return value;
}
}  // namespace detail

/// Worker count used by the parallel loops. Resolution order: explicit
/// set_thread_count(), then HDIVFWD_THREADS, then hardware concurrency.
inline int thread_count() {
  int n = detail::thread_setting().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("HDIVFWD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_thread_count(int n) { detail::thread_setting().store(std::max(0, n)); }

/// Runs body(begin, end) over [0, n) split into contiguous ranges. The body
/// must only write to locations owned by its range; results are then
/// independent of the worker count.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_grain = 4096) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), (n + min_grain - 1) / std::max<std::size_t>(min_grain, 1));
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&body, b, e] { body(b, e); });
  }
  body(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

/// Fixed block size of all reductions. Partial sums are formed per block and
/// combined in block order, so a reduction is bit-identical for any worker
/// count.
inline constexpr std::size_t kReductionBlock = 8192;

template <class Term>
double deterministic_sum(std::size_t n, Term&& term) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(
      blocks,
      [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
          const std::size_t lo = b * kReductionBlock;
          const std::size_t hi = std::min(n, lo + kReductionBlock);
          double s = 0.0;
          for (std::size_t i = lo; i < hi; ++i) s += term(i);
          partial[b] = s;
        }
      },
      4);
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return deterministic_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sum(std::span<const double> a) {
  return deterministic_sum(a.size(), [&](std::size_t i) { return a[i]; });
}

inline double mean(std::span<const double> a) {
  return a.empty() ? 0.0 : sum(a) / static_cast<double>(a.size());
}

/// Removes the mean, i.e. projects onto the complement of the constants.
inline void remove_mean(std::span<double> a) {
  const double m = mean(a);
  for (double& v : a) v -= m;
}

}  // namespace hdivfwd
