#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace dsmp {

template <typename Result>
std::vector<Result> run_shards(std::size_t total, std::size_t shard, unsigned workers,
                               const std::function<Result(std::size_t, std::size_t)>& fn) {
    if (shard == 0) shard = total;
    const std::size_t count = total == 0 ? 0 : (total + shard - 1) / shard;
    std::vector<Result> results(count);
    auto size_of = [&](std::size_t k) { return std::min(shard, total - k * shard); };

    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) results[k] = fn(k, size_of(k));
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    results[k] = fn(k, size_of(k));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return results;
}

}  // namespace dsmp
