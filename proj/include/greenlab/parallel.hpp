#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace greenlab
{
//! Process-wide worker count used by parallel_for (default 1)
std::size_t worker_count();
void set_worker_count(std::size_t workers);

/*!
 * Run body(i) for i in [0, n) on the configured workers.
 *
 * Work is handed out in chunks from a shared counter; callers write results
 * into slot i so the output never depends on scheduling. If several items
 * throw, the exception of the smallest index is rethrown.
 */
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t chunk = 64)
{
    std::size_t workers = std::min(worker_count(), (n + chunk - 1) / chunk);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_lock;
    std::exception_ptr error;
    std::size_t error_index = n;
    auto run = [&] {
        while (true)
        {
            std::size_t begin = next.fetch_add(chunk);
            if (begin >= n)
                return;
            std::size_t end = std::min(n, begin + chunk);
            for (std::size_t i = begin; i < end; ++i)
            {
                try
                {
                    body(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> guard(error_lock);
                    if (i < error_index)
                    {
                        error_index = i;
                        error = std::current_exception();
                    }
                    return;
                }
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w)
        threads.emplace_back(run);
    run();
    for (auto& t : threads)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace greenlab
