#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

namespace darnwalk {

/// Worker-count selection for data-parallel loops. Results never depend on it.
struct Exec {
    unsigned threads = default_threads();

    static unsigned default_threads() noexcept
    {
        return std::max(1u, std::thread::hardware_concurrency());
    }
};

/// Runs `body(i)` for i in [0, n) over contiguous blocks. If any call throws,
/// the exception raised at the lowest index is rethrown, whatever the worker count.
template <class Body>
void parallel_for(std::size_t n, const Exec& exec, Body&& body)
{
    const std::size_t workers = std::min<std::size_t>(std::max(1u, exec.threads), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> failed_at(workers, std::numeric_limits<std::size_t>::max());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                    failed_at[w] = i;
                    return;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();

    const auto first = std::min_element(failed_at.begin(), failed_at.end());
    if (*first != std::numeric_limits<std::size_t>::max())
        std::rethrow_exception(errors[static_cast<std::size_t>(first - failed_at.begin())]);
}

template <class T, class Body>
std::vector<T> parallel_map(std::size_t n, const Exec& exec, Body&& body)
{
    std::vector<T> out(n);
    parallel_for(n, exec, [&](std::size_t i) { out[i] = body(i); });
    return out;
}

}  // namespace darnwalk
