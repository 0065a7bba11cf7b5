#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qpt/types.hpp"

namespace qpt {

template <class R>
struct TaskResult {
    std::optional<R> value;
    std::string error; // empty on success
    bool numerical = false; // error came from a NumericalFailure

    bool ok() const noexcept { return value.has_value(); }
};

/// Runs fn(0..count-1) on up to `workers` threads. Results are stored by index,
/// so the output does not depend on scheduling. Exceptions are captured per task.
template <class Fn>
auto parallel_map(std::size_t count, std::size_t workers, Fn&& fn) {
    using R = std::decay_t<decltype(fn(std::size_t{}))>;
    std::vector<TaskResult<R>> results(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i].value.emplace(fn(i));
            } catch (const NumericalFailure& e) {
                results[i].error = e.what();
                results[i].numerical = true;
            } catch (const std::exception& e) {
                results[i].error = e.what();
            } catch (...) {
                results[i].error = "unknown error";
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (n_threads == 1) {
        worker();
        return results;
    }
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    pool.clear(); // joins
    return results;
}

} // namespace qpt
