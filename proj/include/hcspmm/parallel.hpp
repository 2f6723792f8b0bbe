#ifndef HCSPMM_PARALLEL_HPP
#define HCSPMM_PARALLEL_HPP

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "types.hpp"

namespace hcspmm {

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(i) for i in [0, count) over contiguous chunks. Each index is
/// visited by exactly one thread, so writes to disjoint per-index state are
/// race free. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(index_t count, unsigned threads, Fn&& fn) {
    if (count <= 0) return;
    const auto workers = static_cast<index_t>(std::min<index_t>(std::max(1u, threads), count));
    if (workers == 1) {
        for (index_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const index_t chunk = detail::ceil_div(count, workers);
        for (index_t w = 0; w < workers; ++w) {
            const index_t lo = w * chunk;
            const index_t hi = std::min(count, lo + chunk);
            pool.emplace_back([&, lo, hi] {
                try {
                    for (index_t i = lo; i < hi; ++i) fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace hcspmm

#endif
