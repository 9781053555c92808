#include "sboxbench/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace sboxbench {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = std::clamp<std::size_t>(jobs < 1 ? 1 : std::size_t(jobs), 1, n);
    if (workers == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, w, b, e] {
            try {
                body(b, e);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index), std::uint32_t(index >> 32),
                      std::uint32_t(tag)};
    return std::mt19937_64(seq);
}

} // namespace sboxbench
