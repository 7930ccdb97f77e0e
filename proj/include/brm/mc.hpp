#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "brm/common.hpp"
#include "brm/parallel.hpp"

namespace brm {

struct McEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::uint64_t n_rep = 0;
    std::uint64_t seed = 0;

    static McEstimate from_moments(double sum, double sumsq, std::uint64_t n,
                                   std::uint64_t seed, bool indicator_mean = false) {
        McEstimate e;
        e.n_rep = n;
        e.seed = seed;
        e.value = sum / static_cast<double>(n);
        double var = sumsq / static_cast<double>(n) - e.value * e.value;
        if (var < 0.0) var = 0.0;
        if (n > 1) var *= static_cast<double>(n) / static_cast<double>(n - 1);
        e.stderr_ = std::sqrt(var / static_cast<double>(n));
        const double z = 1.959963984540054;
        e.ci_lo = e.value - z * e.stderr_;
        e.ci_hi = e.value + z * e.stderr_;
        if (indicator_mean) {
            // rule of three for degenerate binomial outcomes
            if (sum == 0.0) { e.ci_lo = 0.0; e.ci_hi = 3.0 / static_cast<double>(n); }
            if (sum == static_cast<double>(n)) {
                e.ci_lo = 1.0 - 3.0 / static_cast<double>(n);
                e.ci_hi = 1.0;
            }
            if (e.ci_lo < 0.0) e.ci_lo = 0.0;
            if (e.ci_hi > 1.0) e.ci_hi = 1.0;
        }
        return e;
    }

    McEstimate scaled(double factor) const {
        McEstimate e = *this;
        e.value *= factor;
        e.stderr_ *= factor;
        e.ci_lo = e.value - 1.959963984540054 * e.stderr_;
        e.ci_hi = e.value + 1.959963984540054 * e.stderr_;
        return e;
    }
};

// Mean of per-replication values produced by fn(rep, stream-seeded RNG access
// is the caller's business). Chunked deterministic aggregation: per-chunk
// Kahan partials combined in chunk order.
template <typename PerRep>
McEstimate mc_mean(std::uint64_t n_rep, std::uint64_t seed, int n_threads, PerRep&& fn,
                   bool indicator_mean = false) {
    require(n_rep >= 1, "n_rep must be positive");
    ChunkPlan plan(n_rep);
    std::vector<double> sums(plan.n_chunks, 0.0), sumsqs(plan.n_chunks, 0.0);
    run_chunks(plan, n_threads, [&](std::uint64_t c) {
        KahanSum s, s2;
        for (std::uint64_t r = plan.begin(c); r < plan.end(c); ++r) {
            double v = fn(r);
            s.add(v);
            s2.add(v * v);
        }
        sums[c] = s.value();
        sumsqs[c] = s2.value();
    });
    KahanSum total, total2;
    for (std::uint64_t c = 0; c < plan.n_chunks; ++c) {
        total.add(sums[c]);
        total2.add(sumsqs[c]);
    }
    return McEstimate::from_moments(total.value(), total2.value(), n_rep, seed, indicator_mean);
}

}  // namespace brm
