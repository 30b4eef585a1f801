#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace lanekit {

namespace detail {
inline std::atomic<int>& thread_override() {
    static std::atomic<int> value{0};
    return value;
}
}  // namespace detail

/// Process-wide thread cap taking precedence over LANEKIT_THREADS; 0 clears it.
inline void set_thread_budget(int threads) { detail::thread_override().store(std::max(0, threads)); }

// LANEKIT_THREADS caps internal parallelism; unset or 0 means hardware_concurrency.
inline int thread_budget() {
    if (const int forced = detail::thread_override().load(); forced > 0) return forced;
    int requested = 0;
    if (const char* env = std::getenv("LANEKIT_THREADS")) {
        try {
            requested = std::stoi(env);
        } catch (...) {
            requested = 0;
        }
    }
    if (requested <= 0) {
        requested = static_cast<int>(std::thread::hardware_concurrency());
    }
    return std::max(1, requested);
}

/// Runs body(begin, end) over disjoint chunks of [0, count). Each index is
/// visited exactly once, so results are independent of the thread count as long
/// as body writes only to its own indices.
template <typename Body>
void parallel_rows(int count, Body&& body, int min_rows_per_task = 16) {
    const int threads = std::min(thread_budget(), std::max(1, count / std::max(1, min_rows_per_task)));
    if (threads <= 1) {
        body(0, count);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    pool.reserve(static_cast<std::size_t>(threads - 1));
    const int chunk = (count + threads - 1) / threads;
    for (int t = 1; t < threads; ++t) {
        const int begin = t * chunk;
        const int end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, &errors, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    try {
        body(0, std::min(count, chunk));
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace lanekit
