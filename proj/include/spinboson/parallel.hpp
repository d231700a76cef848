// parallel.hpp: Static-partition parallel loop over an index range

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sb {

// Runs body(i) for i in [0, n) on up to `jobs` threads (jobs <= 0: hardware
// concurrency). Each index is processed exactly once, so results written to
// per-index slots do not depend on the thread count. The first exception
// thrown by any body is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t n, int jobs, Body&& body) {
    std::size_t threads = jobs > 0 ? std::size_t(jobs) : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) body(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first) first = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

} // namespace sb
