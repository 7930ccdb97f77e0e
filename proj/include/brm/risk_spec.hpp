#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "brm/cov_model.hpp"

namespace brm {

// Full problem instance: component i fails at time t when
// W_i(t) - c_i t > a_i u; psi_k is the probability that at least k
// components are simultaneously failed at some t in the horizon.
struct RiskSpec {
    CovModel model;
    Vector a;
    Vector c;
    double u = 1.0;
    int k = 1;
    double s_start = 0.0;
    double t_end = 1.0;
    bool infinite_horizon = false;

    int dim() const { return model.dim(); }

    void validate_basic() const {
        require(a.size() == dim() && c.size() == dim(), "a and c must have dimension d");
        require(k >= 1 && k <= dim(), "k must lie in [1, d]");
        require(u > 0.0, "threshold scale u must be positive");
        require(s_start >= 0.0, "s_start must be nonnegative");
        if (!infinite_horizon) require(t_end > s_start, "t_end must exceed s_start");
    }

    // Finite-horizon asymptotics need a with at most k-1 non-positive entries.
    void validate_finite_asymptotics() const {
        validate_basic();
        int nonpos = 0;
        for (int i = 0; i < dim(); ++i)
            if (a[i] <= 0.0) ++nonpos;
        require(nonpos <= k - 1, "a has more than k-1 non-positive components");
    }

    // Infinite horizon additionally needs the sign conditions on c and on
    // a + c t for every t >= 0; the count of non-positive components only
    // changes at the crossing times -a_i/c_i, so checking those plus points
    // in between covers all of t >= 0.
    void validate_infinite_horizon() const {
        validate_basic();
        require(infinite_horizon, "spec is not an infinite-horizon instance");
        auto count_nonpos = [&](const Vector& v) {
            int n = 0;
            for (int i = 0; i < v.size(); ++i)
                if (v[i] <= 0.0) ++n;
            return n;
        };
        require(count_nonpos(c) <= k - 1, "c has more than k-1 non-positive components");
        std::vector<double> probes{0.0};
        double t_max = 1.0;
        for (int i = 0; i < dim(); ++i) {
            if (c[i] != 0.0) {
                double tc = -a[i] / c[i];
                if (tc > 0.0) {
                    probes.push_back(tc);
                    t_max = std::max(t_max, tc);
                }
            }
        }
        std::sort(probes.begin(), probes.end());
        std::vector<double> checks = probes;
        for (std::size_t i = 1; i < probes.size(); ++i)
            checks.push_back(0.5 * (probes[i - 1] + probes[i]));
        checks.push_back(2.0 * t_max + 1.0);
        for (double t : checks) {
            Vector v = a + c * t;
            require(count_nonpos(v) <= k - 1,
                    "a + c*t has more than k-1 non-positive components at some t >= 0");
        }
    }

    // Self-similarity reduction to the unit horizon:
    // psi_k(S, T, a u) = psi_k(S/T, 1, a u') with drift c*sqrt(T) and
    // u' = u/sqrt(T).
    RiskSpec reduced_to_unit_horizon() const {
        require(!infinite_horizon && t_end > 0.0, "reduction needs a finite horizon");
        RiskSpec r = *this;
        double sq = std::sqrt(t_end);
        r.c = c * sq;
        r.u = u / sq;
        r.s_start = s_start / t_end;
        r.t_end = 1.0;
        return r;
    }

    RiskSpec restricted(const std::vector<int>& idx) const {
        RiskSpec r{model.restricted(idx), Vector(idx.size()), Vector(idx.size()),
                   u, static_cast<int>(idx.size()), s_start, t_end, infinite_horizon};
        for (std::size_t i = 0; i < idx.size(); ++i) {
            r.a[i] = a[idx[i]];
            r.c[i] = c[idx[i]];
        }
        return r;
    }
};

// Enumerate all k-subsets of {0..d-1} as bitmasks, sorted ascending.
inline std::vector<std::uint32_t> k_subsets(int d, int k) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1u << d); ++m)
        if (__builtin_popcount(m) == k) out.push_back(m);
    return out;
}

}  // namespace brm
