#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pcalab::mc::detail {

/// Calls workers[w].run(stream) for every stream in [begin, end), handing out
/// batches dynamically. Each worker is touched by exactly one thread.
template <class Worker>
void for_streams(std::uint64_t begin, std::uint64_t end, std::vector<Worker>& workers) {
    if (begin >= end) return;
    if (workers.size() == 1) {
        for (std::uint64_t s = begin; s < end; ++s) workers[0].run(s);
        return;
    }
    constexpr std::uint64_t kBatch = 256;
    std::atomic<std::uint64_t> next{begin};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers.size());
    for (auto& w : workers) {
        pool.emplace_back([&, wp = &w] {
            try {
                for (;;) {
                    const std::uint64_t lo = next.fetch_add(kBatch);
                    if (lo >= end) break;
                    const std::uint64_t hi = std::min(end, lo + kBatch);
                    for (std::uint64_t s = lo; s < hi; ++s) wp->run(s);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(end);
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace pcalab::mc::detail
