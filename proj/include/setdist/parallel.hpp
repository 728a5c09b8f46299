#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace setdist {

// Deterministic task parallelism. Work is split into logically indexed items
// (paths, sample blocks); each item's result is written to its own slot and
// reductions run sequentially in item order afterwards, so the numbers are
// identical for any worker count.

inline std::size_t& default_thread_count_ref() {
    static std::size_t n = [] {
        if (const char* env = std::getenv("SETDIST_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<std::size_t>(v);
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hc > 0 ? hc : 1);
    }();
    return n;
}

inline std::size_t default_thread_count() { return default_thread_count_ref(); }
inline void set_default_thread_count(std::size_t n) { default_thread_count_ref() = (n >= 1 ? n : 1); }

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Exceptions are captured and the first one rethrown after join.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t threads = 0) {
    if (n == 0) return;
    std::size_t k = threads == 0 ? default_thread_count() : threads;
    if (k > n) k = n;
    if (k <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t t = 0; t < k; ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace setdist
