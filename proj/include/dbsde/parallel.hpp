#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <vector>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/info.h>
#include <tbb/task_arena.h>

namespace dbsde {

namespace detail {
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};
    return cap;
}
}  // namespace detail

/// Caps the number of worker threads. 0 restores the scheduler default.
/// Results never depend on this value.
inline void set_num_threads(int n) { detail::thread_cap().store(std::max(0, n)); }

inline int num_threads() {
    const int cap = detail::thread_cap().load();
    return cap > 0 ? cap : tbb::this_task_arena::max_concurrency();
}

/// Samples are split into blocks of this fixed size. Reductions combine
/// per-block partials in block order, so the floating-point result is the
/// same for any thread count.
inline constexpr std::size_t kBlockSize = 512;

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

/// Runs body(begin, end, block) for every block of [0, n).
template <class Body>
void parallel_blocks(std::size_t n, Body&& body) {
    const std::size_t nb = block_count(n);
    if (nb == 0) return;
    auto run = [&] {
        tbb::parallel_for(tbb::blocked_range<std::size_t>(0, nb, 1),
                          [&](const tbb::blocked_range<std::size_t>& r) {
                              for (std::size_t b = r.begin(); b != r.end(); ++b) {
                                  const std::size_t lo = b * kBlockSize;
                                  const std::size_t hi = std::min(n, lo + kBlockSize);
                                  body(lo, hi, b);
                              }
                          });
    };
    const int cap = detail::thread_cap().load();
    if (cap == 1 || nb == 1) {
        for (std::size_t b = 0; b < nb; ++b) {
            const std::size_t lo = b * kBlockSize;
            body(lo, std::min(n, lo + kBlockSize), b);
        }
    } else if (cap > 1) {
        // more threads than cores only adds oversubscription (and a TBB warning)
        tbb::task_arena arena(std::min(cap, tbb::info::default_concurrency()));
        arena.execute(run);
    } else {
        run();
    }
}

/// Per-sample parallel loop.
template <class Body>
void parallel_for_each(std::size_t n, Body&& body) {
    parallel_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t k = lo; k < hi; ++k) body(k);
    });
}

/// Deterministic vector-valued sum: partial(k, acc) adds sample k into acc
/// (length width). Blocks are accumulated independently and folded in order.
template <class Partial>
std::vector<double> parallel_sum(std::size_t n, std::size_t width, Partial&& partial) {
    const std::size_t nb = block_count(n);
    std::vector<double> parts(nb * width, 0.0);
    parallel_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t b) {
        double* acc = parts.data() + b * width;
        for (std::size_t k = lo; k < hi; ++k) partial(k, acc);
    });
    std::vector<double> total(width, 0.0);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t j = 0; j < width; ++j) total[j] += parts[b * width + j];
    return total;
}

}  // namespace dbsde
