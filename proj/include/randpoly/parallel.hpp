#pragma once

// Index-parallel loop over a fixed item count. Items are claimed from an atomic
// counter; callers store results by index, so output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace randpoly {

template <typename Fn>
void parallel_for(std::size_t n_items, int workers, Fn&& fn)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        try {
            for (std::size_t i = next++; i < n_items; i = next++) {
                fn(i);
            }
        } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
            next = n_items;
        }
    };
    const auto count = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), std::max<std::size_t>(n_items, 1)));
    if (count == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(count));
        for (int w = 0; w < count; ++w) {
            pool.emplace_back(work);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace randpoly
