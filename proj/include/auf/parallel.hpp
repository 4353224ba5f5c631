#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace auf {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is split by
// stride so unit i always lands on thread i % jobs; with per-unit seeds this
// keeps results independent of the job count. fn must write only to
// disjoint, preallocated slots.
inline void parallel_for(size_t n, size_t jobs,
                         const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (jobs > n) jobs = n;
    std::vector<std::thread> threads;
    threads.reserve(jobs);
    std::vector<std::exception_ptr> errs(jobs);
    for (size_t t = 0; t < jobs; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (size_t i = t; i < n; i += jobs) fn(i);
            } catch (...) {
                errs[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace auf
