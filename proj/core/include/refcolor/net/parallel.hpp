#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace refcolor::net {

// Worker count: hardware concurrency capped by the REFCOLOR_THREADS
// environment variable (minimum 1).
inline unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("REFCOLOR_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

// Runs f(i) for i in [0, n); results must go to pre-indexed slots so the
// outcome is independent of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
    const unsigned workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
        });
    for (auto& t : pool) t.join();
}

} // namespace refcolor::net
