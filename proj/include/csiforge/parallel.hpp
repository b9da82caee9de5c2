// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace csiforge {

// Worker cap: CSIFORGE_THREADS if set, else hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("CSIFORGE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1)
            return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

// Runs fn(i) for i in [0, n). Callers get determinism by writing result i to
// slot i; the reduction order is then up to the caller, not the scheduler.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = std::size_t(w); i < n; i += std::size_t(workers))
                fn(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

} // namespace csiforge
