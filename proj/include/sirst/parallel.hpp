#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sirst {

inline std::size_t default_workers() {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Calls fn(index, worker) for every index in [0, n) on up to `workers`
// threads. Indices are claimed dynamically, so fn must write only to
// index-owned or worker-owned state. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, std::size_t{0});
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i, w);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace sirst
