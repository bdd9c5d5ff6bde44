#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace uneqot {

// Process-wide worker count for parallel grid sweeps (1 = serial).  Results
// are written by index, so the outcome is identical for any thread count.
inline int& thread_count() {
    static int n = 1;
    return n;
}

template <typename F>
void parallel_for(std::size_t n, F&& body) {
    int workers = thread_count();
    if (workers <= 1 || n < 32) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            std::size_t chunk = next.fetch_add(16);
            if (chunk >= n) return;
            std::size_t end = std::min(n, chunk + 16);
            for (std::size_t i = chunk; i < end; ++i) body(i);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

} // namespace uneqot
