#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "brm/cov_model.hpp"
#include "brm/mc.hpp"
#include "brm/rng.hpp"

namespace brm {

// Time grid for path discretization. Strictly increasing, times[0] = s_start.
struct PathGrid {
    std::vector<double> times;

    static PathGrid uniform(double s_start, double t_end, int n_steps) {
        require(n_steps >= 1, "n_steps must be positive");
        require(t_end > s_start && s_start >= 0.0, "grid requires 0 <= s_start < t_end");
        PathGrid g;
        g.times.resize(n_steps + 1);
        double dt = (t_end - s_start) / n_steps;
        for (int i = 0; i <= n_steps; ++i) g.times[i] = s_start + i * dt;
        g.times.back() = t_end;
        return g;
    }

    // Uniform grid over [0, t_end] with `anchor` inserted as an exact node.
    static PathGrid uniform_with_anchor(double t_end, int n_steps, double anchor) {
        PathGrid g = uniform(0.0, t_end, n_steps);
        if (anchor <= 0.0 || anchor >= t_end) return g;
        auto it = std::lower_bound(g.times.begin(), g.times.end(), anchor);
        if (std::abs(*it - anchor) > 1e-12 * std::max(1.0, t_end))
            g.times.insert(it, anchor);
        else
            *it = anchor;
        return g;
    }

    int n_steps() const { return static_cast<int>(times.size()) - 1; }
    double s_start() const { return times.front(); }
    double t_end() const { return times.back(); }

    void validate() const {
        require(times.size() >= 2, "grid needs at least two nodes");
        for (std::size_t i = 1; i < times.size(); ++i)
            require(times[i] > times[i - 1], "grid times must be strictly increasing");
        require(times.front() >= 0.0, "grid must start at a nonnegative time");
    }
};

// Per-component lower thresholds; a component may be unbounded below, which
// is kept as a flag rather than a -inf float.
struct LowerBounds {
    std::vector<double> value;
    std::vector<bool> unbounded;

    static LowerBounds all_finite(const Vector& v) {
        LowerBounds b;
        b.value.assign(v.data(), v.data() + v.size());
        b.unbounded.assign(v.size(), false);
        return b;
    }

    static LowerBounds all_unbounded(int d) {
        LowerBounds b;
        b.value.assign(d, 0.0);
        b.unbounded.assign(d, true);
        return b;
    }

    int dim() const { return static_cast<int>(value.size()); }
};

// Density of N(0, Sigma) at x, computed through the Cholesky factor.
inline double mvn_pdf(const CovModel& model, const Vector& x) {
    require(x.size() == model.dim(), "dimension mismatch");
    const double log2pi = 1.8378770664093454836;
    double q = model.quad_form_inv(x);
    double logp = -0.5 * (model.dim() * log2pi + model.log_det() + q);
    return std::exp(logp);
}

namespace detail {

// Row-major packed copy of the Cholesky factor for tight sampling loops.
struct PackedChol {
    int d;
    std::vector<double> l;  // row-major lower triangle, full d*d with zeros

    explicit PackedChol(const CovModel& m) : d(m.dim()), l(m.dim() * m.dim(), 0.0) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j <= i; ++j) l[i * d + j] = m.chol()(i, j);
    }

    // out = L * z
    void mulvec(const double* z, double* out) const {
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            const double* row = &l[i * d];
            for (int j = 0; j <= i; ++j) s += row[j] * z[j];
            out[i] = s;
        }
    }
};

}  // namespace detail

// Monte Carlo estimate of P(W(1) >= lower) with antithetic variates.
// Deterministic for a given seed regardless of thread count.
inline McEstimate mvn_survival(const CovModel& model, const LowerBounds& lower,
                               std::uint64_t n_rep, std::uint64_t seed, int n_threads = 0) {
    require(lower.dim() == model.dim(), "dimension mismatch");
    require(n_rep >= 1000, "mvn_survival requires n_rep >= 1000");
    require(model.dim() <= 64, "mvn_survival supports d <= 64");
    const int d = model.dim();
    bool all_unbounded = true;
    for (int i = 0; i < d; ++i)
        if (!lower.unbounded[i]) all_unbounded = false;
    if (all_unbounded) {
        McEstimate e;
        e.value = 1.0;
        e.ci_lo = e.ci_hi = 1.0;
        e.n_rep = n_rep;
        e.seed = seed;
        return e;
    }

    const detail::PackedChol L(model);
    return mc_mean(
        n_rep, seed, n_threads,
        [&](std::uint64_t rep) {
            RandomStream rng(seed, rep);
            double z[64], w[64];
            for (int i = 0; i < d; ++i) z[i] = rng.normal();
            L.mulvec(z, w);
            auto hit = [&](double sign) {
                for (int i = 0; i < d; ++i)
                    if (!lower.unbounded[i] && sign * w[i] < lower.value[i]) return 0.0;
                return 1.0;
            };
            return 0.5 * (hit(1.0) + hit(-1.0));
        },
        true);
}

// Correlated Brownian paths with drift: returns W(t) - c*t on the grid.
// If the grid starts after 0 the first node carries N(0, t0*Sigma); paths
// conceptually start at the origin at time 0.
inline std::vector<Matrix> sample_paths(const CovModel& model, const Vector& drift_c,
                                        const PathGrid& grid, std::uint64_t n_rep,
                                        std::uint64_t seed) {
    grid.validate();
    require(drift_c.size() == model.dim(), "dimension mismatch");
    const int d = model.dim();
    const int n = grid.n_steps();
    const detail::PackedChol L(model);
    std::vector<Matrix> out(n_rep, Matrix(d, n + 1));
    for (std::uint64_t rep = 0; rep < n_rep; ++rep) {
        RandomStream rng(seed, rep);
        Matrix& path = out[rep];
        std::vector<double> w(d, 0.0), z(d), dz(d);
        double t_prev = 0.0;
        for (int j = 0; j <= n; ++j) {
            double t = grid.times[j];
            double dt = t - t_prev;
            if (dt > 0.0) {
                double sq = std::sqrt(dt);
                for (int i = 0; i < d; ++i) z[i] = sq * rng.normal();
                L.mulvec(z.data(), dz.data());
                for (int i = 0; i < d; ++i) w[i] += dz[i];
            }
            for (int i = 0; i < d; ++i) path(i, j) = w[i] - drift_c[i] * t;
            t_prev = t;
        }
    }
    return out;
}

}  // namespace brm
