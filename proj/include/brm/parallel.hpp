#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace brm {

inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BRM_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Fixed-size chunking over [0, n_items). The chunk layout depends only on
// n_items, never on the thread count, so per-chunk results are identical no
// matter how many workers run; the caller reduces chunks in index order.
struct ChunkPlan {
    std::uint64_t n_items;
    std::uint64_t chunk_size;
    std::uint64_t n_chunks;

    ChunkPlan(std::uint64_t items, std::uint64_t chunk = 1 << 16)
        : n_items(items), chunk_size(chunk),
          n_chunks(items == 0 ? 0 : (items + chunk - 1) / chunk) {}

    std::uint64_t begin(std::uint64_t c) const { return c * chunk_size; }
    std::uint64_t end(std::uint64_t c) const {
        std::uint64_t e = (c + 1) * chunk_size;
        return e < n_items ? e : n_items;
    }
};

// Runs worker(chunk_index) for every chunk, work-stealing over an atomic
// counter. worker must only write to its own chunk's output slot.
template <typename Worker>
void run_chunks(const ChunkPlan& plan, int n_threads, Worker&& worker) {
    n_threads = resolve_threads(n_threads);
    if (n_threads <= 1 || plan.n_chunks <= 1) {
        for (std::uint64_t c = 0; c < plan.n_chunks; ++c) worker(c);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    auto pull = [&] {
        for (;;) {
            std::uint64_t c = next.fetch_add(1);
            if (c >= plan.n_chunks) return;
            worker(c);
        }
    };
    std::vector<std::thread> pool;
    int spawn = static_cast<int>(std::min<std::uint64_t>(n_threads, plan.n_chunks));
    pool.reserve(spawn - 1);
    for (int i = 1; i < spawn; ++i) pool.emplace_back(pull);
    pull();
    for (auto& t : pool) t.join();
}

}  // namespace brm
