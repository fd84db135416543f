#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace matvqa {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all workers join.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)> &fn) {
    if(n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if(workers == 1) {
        for(std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for(std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for(std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch(...) {
                        std::lock_guard lock(failure_mutex);
                        if(!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if(failure) std::rethrow_exception(failure);
}

} // namespace matvqa
