#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qntk {

/// Resolves a requested thread count; 0 means hardware concurrency.
inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

/**
 * Runs fn(i) for i in [0, count) on up to `threads` workers using contiguous
 * static chunks. Callers write results into slot i only, so output is
 * independent of the thread count. The exception from the lowest failing
 * chunk is rethrown.
 */
template <typename Fn> void parallel_for(std::size_t count, int threads, Fn &&fn) {
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(resolve_threads(threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) {
        t.join();
    }
    for (auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Pairwise sum in index order; the association pattern depends only on
/// values.size(), never on how the values were produced.
inline double tree_sum(const std::vector<double> &values, std::size_t begin, std::size_t end) {
    if (end <= begin) {
        return 0.0;
    }
    if (end - begin == 1) {
        return values[begin];
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return tree_sum(values, begin, mid) + tree_sum(values, mid, end);
}

inline double tree_sum(const std::vector<double> &values) {
    return tree_sum(values, 0, values.size());
}

} // namespace qntk
