#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "brm/asymptotics.hpp"
#include "brm/gauss.hpp"
#include "brm/mc.hpp"
#include "brm/risk_spec.hpp"

namespace brm {

struct SimOptions {
    std::uint64_t n_rep = 100000;
    std::uint64_t seed = 1;
    int n_threads = 0;
    bool record_times = false;     // record first all-exceed grid time
    double prune_theta = 7.0;      // stride/no-hope threshold, in sd units
    int prune_interval = 16;       // checked nodes between termination tests
    double term_epsilon = 1e-8;    // infinite horizon: residual-mass termination
    int refine_depth = 12;         // infinite horizon: max bisection depth per cell
    double refine_eta = 3.0;       // refinement trigger, in cell-sd units
};

struct SimResult {
    McEstimate psi_hat;
    std::uint64_t n_paths = 0;
    PathGrid grid;
    std::vector<double> hitting_times;           // tau samples in [S,T] (raw times)
    std::pair<double, double> refinement_check;  // coarse vs fine estimate
    bool grid_bias_warning = false;
    double tail_bound_log = -std::numeric_limits<double>::infinity();
    std::vector<std::string> warnings;
};

namespace detail {

struct SimAccum {
    double hits = 0.0;
    double coarse_hits = 0.0;
    double diff_sq = 0.0;  // fine-minus-coarse indicator, squared sum (== sum, 0/1)
    std::vector<double> times;
};

// One walk shared by the finite-horizon estimators: correlated increments,
// exceedance counting against precomputed thresholds, no-hope pruning, and
// the coupled coarse-subgrid evaluation used for the refinement check.
class FiniteEngine {
public:
    FiniteEngine(const RiskSpec& spec, const PathGrid& grid, const SimOptions& opts,
                 bool monitor_from_zero)
        : spec_(spec), grid_(grid), opts_(opts), L_(spec.model), d_(spec.dim()) {
        grid_.validate();
        const int n = grid_.n_steps();
        thr_.resize(static_cast<std::size_t>(n + 1) * d_);
        monitored_.resize(n + 1);
        double S = spec_.s_start;
        for (int j = 0; j <= n; ++j) {
            double t = grid_.times[j];
            monitored_[j] = monitor_from_zero || t >= S - 1e-12 * std::max(1.0, S);
            for (int i = 0; i < d_; ++i)
                thr_[static_cast<std::size_t>(j) * d_ + i] = spec_.a[i] * spec_.u + spec_.c[i] * t;
        }
        // coarse = every second monitored node, counted so the horizon stays in
        std::vector<int> mon;
        for (int j = 0; j <= n; ++j)
            if (monitored_[j]) mon.push_back(j);
        coarse_.assign(n + 1, false);
        for (int p = static_cast<int>(mon.size()) - 1; p >= 0; p -= 2) coarse_[mon[p]] = true;
        sd_.resize(d_);
        for (int i = 0; i < d_; ++i) sd_[i] = std::sqrt(spec_.model.sigma()(i, i));
    }

    // Safe time window: the largest horizon over which fewer than k
    // components could plausibly reach their failure lines (theta-sigma
    // scale). Nodes inside the window cannot contribute a hit and are
    // skipped with one exact Gaussian jump.
    double safe_window(const double* w, double t) const {
        thread_local std::vector<double> s_i;
        s_i.assign(d_, 0.0);
        const double theta = opts_.prune_theta;
        for (int i = 0; i < d_; ++i) {
            double line = spec_.a[i] * spec_.u +
                          spec_.c[i] * (spec_.c[i] >= 0.0 ? t : grid_.t_end());
            double margin = line - w[i];
            if (margin <= 0.0) return 0.0;
            double scaled = margin / (theta * sd_[i]);
            s_i[i] = scaled * scaled;
        }
        std::nth_element(s_i.begin(), s_i.begin() + (spec_.k - 1), s_i.end());
        return s_i[spec_.k - 1];
    }

    // Returns (fine hit, coarse hit, first monitored hit time or -1).
    template <typename Rng>
    void walk(Rng& rng, bool& fine_hit, bool& coarse_hit, double& tau) const {
        const int n = grid_.n_steps();
        thread_local std::vector<double> w, z, dz;
        w.assign(d_, 0.0);
        z.assign(d_, 0.0);
        dz.assign(d_, 0.0);
        fine_hit = coarse_hit = false;
        tau = -1.0;
        int j = 0;
        for (;;) {
            double t = grid_.times[j];
            if (monitored_[j]) {
                const double* th = &thr_[static_cast<std::size_t>(j) * d_];
                int count = 0;
                for (int i = 0; i < d_; ++i) count += w[i] > th[i];
                if (count >= spec_.k) {
                    if (!fine_hit) {
                        fine_hit = true;
                        tau = t;
                    }
                    if (coarse_[j]) {
                        coarse_hit = true;
                        return;
                    }
                }
            }
            if (j == n) return;
            // choose the next node: single step near the failure surface,
            // one long exact jump while no hit is plausible
            int next = j + 1;
            double window = safe_window(w.data(), t);
            if (window >= grid_.t_end() - t) return;  // nothing left to hit
            if (window > 0.0) {
                double t_target = t + window;
                while (next < n && grid_.times[next + 1] <= t_target) ++next;
            }
            double dt = grid_.times[next] - t;
            double sq = std::sqrt(dt);
            for (int i = 0; i < d_; ++i) z[i] = sq * rng.normal();
            L_.mulvec(z.data(), dz.data());
            for (int i = 0; i < d_; ++i) w[i] += dz[i];
            j = next;
        }
    }

    const PathGrid& grid() const { return grid_; }

private:
    RiskSpec spec_;
    PathGrid grid_;
    SimOptions opts_;
    PackedChol L_;
    int d_;
    std::vector<double> thr_;
    std::vector<char> monitored_;
    std::vector<char> coarse_;
    std::vector<double> sd_;
};

}  // namespace detail

inline PathGrid make_sim_grid(const RiskSpec& spec, int n_steps) {
    return PathGrid::uniform_with_anchor(spec.t_end, n_steps, spec.s_start);
}

// Path-simulation estimate of psi_k(S, T, a u). The grid evaluation is a
// union over a finite subgrid, so the estimate is downward biased; the
// coupled coarse-grid evaluation quantifies that bias.
inline SimResult simulate_psi(const RiskSpec& spec, const PathGrid& grid, const SimOptions& opts,
                              bool monitor_from_zero = false) {
    spec.validate_basic();
    require(!spec.infinite_horizon, "simulate_psi requires a finite horizon");
    require(grid.n_steps() >= 256, "simulate_psi requires n_steps >= 256");
    detail::FiniteEngine engine(spec, grid, opts, monitor_from_zero);

    ChunkPlan plan(opts.n_rep);
    std::vector<detail::SimAccum> acc(plan.n_chunks);
    run_chunks(plan, opts.n_threads, [&](std::uint64_t c) {
        detail::SimAccum& a = acc[c];
        for (std::uint64_t rep = plan.begin(c); rep < plan.end(c); ++rep) {
            RandomStream rng(opts.seed, rep);
            bool fine = false, coarse = false;
            double tau = -1.0;
            engine.walk(rng, fine, coarse, tau);
            if (fine) a.hits += 1.0;
            if (coarse) a.coarse_hits += 1.0;
            if (fine && !coarse) a.diff_sq += 1.0;
            if (opts.record_times && fine && tau >= spec.s_start - 1e-12 &&
                tau <= spec.t_end + 1e-12)
                a.times.push_back(tau);
        }
    });

    double hits = 0.0, coarse_hits = 0.0, diff = 0.0;
    SimResult res;
    res.grid = grid;
    res.n_paths = opts.n_rep;
    for (auto& a : acc) {
        hits += a.hits;
        coarse_hits += a.coarse_hits;
        diff += a.diff_sq;
        res.hitting_times.insert(res.hitting_times.end(), a.times.begin(), a.times.end());
    }
    const double n = static_cast<double>(opts.n_rep);
    res.psi_hat = McEstimate::from_moments(hits, hits, opts.n_rep, opts.seed, true);
    res.refinement_check = {coarse_hits / n, hits / n};
    double mean_diff = diff / n;
    double sd_diff = std::sqrt(std::max(0.0, (diff / n - mean_diff * mean_diff)) / n);
    if (mean_diff > 3.0 * sd_diff && diff > 0.0) {
        res.grid_bias_warning = true;
        res.warnings.push_back("GridBias: refinement estimates disagree at 3 joint stderr");
    }
    return res;
}

inline SimResult simulate_psi(const RiskSpec& spec, int n_steps, const SimOptions& opts) {
    return simulate_psi(spec, make_sim_grid(spec, n_steps), opts);
}

// Infinite-horizon variant: truncates at t_cap, walks a base grid, and
// refines cells near the failure surface by bisecting the Brownian bridge.
// Every evaluation point is a true path point; the estimator stays a finite
// subgrid indicator (downward biased), with resolution concentrated where a
// crossing is plausible. Paths stop once the residual crossing mass is below
// term_epsilon. A log-scale bound on the mass beyond t_cap is reported.
inline SimResult simulate_psi_infinite(const RiskSpec& spec, double t_cap, int n_steps,
                                       const SimOptions& opts) {
    spec.validate_infinite_horizon();
    require(t_cap > spec.s_start, "t_cap must exceed s_start");
    require(n_steps >= 256, "simulate_psi_infinite requires n_steps >= 256");

    const int d = spec.dim();
    PathGrid grid = PathGrid::uniform_with_anchor(t_cap, n_steps, spec.s_start);
    const int n = grid.n_steps();
    const detail::PackedChol L(spec.model);
    std::vector<double> sd(d), var(d);
    for (int i = 0; i < d; ++i) {
        var[i] = spec.model.sigma()(i, i);
        sd[i] = std::sqrt(var[i]);
    }
    const double S = spec.s_start;

    struct RefState {
        const RiskSpec* spec;
        const detail::PackedChol* L;
        const std::vector<double>* sd;
        double eta;
        RandomStream* rng;
    };

    // hit test at a concrete (t, w)
    auto hit_at = [&](double t, const double* w) {
        if (t < S - 1e-12) return false;
        int count = 0;
        for (int i = 0; i < d; ++i)
            if (w[i] > spec.a[i] * spec.u + spec.c[i] * t) ++count;
        return count >= spec.k;
    };
    auto cell_triggers = [&](double t0, double t1, const double* w0, const double* w1) {
        if (t1 < S - 1e-12) return false;
        double delta = t1 - t0;
        int plausible = 0;
        for (int i = 0; i < d; ++i) {
            double line = spec.a[i] * spec.u + spec.c[i] * (spec.c[i] >= 0.0 ? t0 : t1);
            double top = std::max(w0[i], w1[i]);
            if (line - top <= opts.refine_eta * sd[i] * std::sqrt(delta)) ++plausible;
        }
        return plausible >= spec.k;
    };

    // recursive bridge bisection; returns true when a hit is found
    std::function<bool(RandomStream&, double, double, const double*, const double*, int)> refine =
        [&](RandomStream& rng, double t0, double t1, const double* w0, const double* w1,
            int depth) -> bool {
        if (depth <= 0) return false;
        double tm = 0.5 * (t0 + t1);
        double delta = t1 - t0;
        double half_sd = 0.5 * std::sqrt(delta);
        thread_local std::vector<std::vector<double>> pool;
        if (pool.size() < static_cast<std::size_t>(2 * (depth + 1)))
            pool.resize(2 * (depth + 1));
        auto& wm = pool[2 * depth];
        auto& zbuf = pool[2 * depth + 1];
        wm.resize(d);
        zbuf.resize(d);
        for (int i = 0; i < d; ++i) zbuf[i] = half_sd * rng.normal();
        L.mulvec(zbuf.data(), wm.data());
        for (int i = 0; i < d; ++i) wm[i] += 0.5 * (w0[i] + w1[i]);
        if (hit_at(tm, wm.data())) return true;
        if (cell_triggers(t0, tm, w0, wm.data()) && refine(rng, t0, tm, w0, wm.data(), depth - 1))
            return true;
        if (cell_triggers(tm, t1, wm.data(), w1) && refine(rng, tm, t1, wm.data(), w1, depth - 1))
            return true;
        return false;
    };

    // stride window: largest horizon with fewer than k plausibly-crossing
    // components, measured on the prune_theta sigma scale
    auto safe_window = [&](const double* w, double t) {
        thread_local std::vector<double> s_i;
        s_i.assign(d, 0.0);
        for (int i = 0; i < d; ++i) {
            double line = spec.a[i] * spec.u + spec.c[i] * (spec.c[i] >= 0.0 ? t : t_cap);
            double margin = line - w[i];
            if (margin <= 0.0) return 0.0;
            double scaled = margin / (opts.prune_theta * sd[i]);
            s_i[i] = scaled * scaled;
        }
        std::nth_element(s_i.begin(), s_i.begin() + (spec.k - 1), s_i.end());
        return s_i[spec.k - 1];
    };

    ChunkPlan plan(opts.n_rep);
    std::vector<double> base_hits(plan.n_chunks, 0.0), refined_hits(plan.n_chunks, 0.0);
    run_chunks(plan, opts.n_threads, [&](std::uint64_t c) {
        double bh = 0.0, rh = 0.0;
        thread_local std::vector<double> w, w_prev, z, dz;
        for (std::uint64_t rep = plan.begin(c); rep < plan.end(c); ++rep) {
            RandomStream rng(opts.seed, rep);
            w.assign(d, 0.0);
            z.assign(d, 0.0);
            dz.assign(d, 0.0);
            w_prev.assign(d, 0.0);
            bool base_hit = false, ref_hit = false;
            int checks = 0;
            int j = 0;
            while (j < n && !base_hit) {
                double t = grid.times[j];
                int next = j + 1;
                double window = safe_window(w.data(), t);
                if (window >= t_cap - t) break;  // nothing left to hit
                if (window > 0.0) {
                    double t_target = t + window;
                    while (next < n && grid.times[next + 1] <= t_target) ++next;
                }
                bool single = (next == j + 1);
                double t_next = grid.times[next];
                double dt = t_next - t;
                double sq = std::sqrt(dt);
                std::copy(w.begin(), w.end(), w_prev.begin());
                for (int i = 0; i < d; ++i) z[i] = sq * rng.normal();
                L.mulvec(z.data(), dz.data());
                for (int i = 0; i < d; ++i) w[i] += dz[i];
                if (hit_at(t_next, w.data())) {
                    base_hit = true;
                    ref_hit = true;
                    break;
                }
                // a refined hit does not end the walk: the base-grid outcome
                // is still needed for the refinement comparison
                if (!ref_hit && single && cell_triggers(t, t_next, w_prev.data(), w.data()) &&
                    refine(rng, t, t_next, w_prev.data(), w.data(), opts.refine_depth))
                    ref_hit = true;
                j = next;
                // residual-mass termination: Markov bound over components
                if (++checks % opts.prune_interval == 0 && j < n) {
                    double sum_p = 0.0;
                    for (int i = 0; i < d; ++i) {
                        double gap = spec.a[i] * spec.u + spec.c[i] * t_next - w[i];
                        double p;
                        if (gap <= 0.0)
                            p = 1.0;
                        else if (spec.c[i] > 0.0)
                            p = std::exp(-2.0 * spec.c[i] * gap / var[i]);
                        else if (spec.c[i] == 0.0)
                            p = 2.0 * norm_sf(gap / (sd[i] * std::sqrt(t_cap - t_next)));
                        else
                            p = 1.0;
                        sum_p += p;
                    }
                    if (sum_p / spec.k <= opts.term_epsilon) break;
                }
            }
            if (base_hit) bh += 1.0;
            if (ref_hit) rh += 1.0;
        }
        base_hits[c] = bh;
        refined_hits[c] = rh;
    });

    double bh = 0.0, rh = 0.0;
    for (std::uint64_t c = 0; c < plan.n_chunks; ++c) {
        bh += base_hits[c];
        rh += refined_hits[c];
    }
    SimResult res;
    res.grid = grid;
    res.n_paths = opts.n_rep;
    res.psi_hat = McEstimate::from_moments(rh, rh, opts.n_rep, opts.seed, true);
    res.refinement_check = {bh / static_cast<double>(opts.n_rep), res.psi_hat.value};

    // analytic bound on the discarded tail: smallest subset log-rate at t_cap/u
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask : k_subsets(d, spec.k)) {
        std::vector<int> idx = detail::mask_to_indices(mask, d);
        RiskSpec sub = spec.restricted(idx);
        double t_resc = t_cap / spec.u;
        Vector shifted = sub.a + sub.c * t_resc;
        bool any_pos = false;
        for (int i = 0; i < shifted.size(); ++i)
            if (shifted[i] > 0.0) any_pos = true;
        if (!any_pos) continue;
        double r_val = solve_pi_sigma(sub.model, shifted).value / t_resc;
        best = std::min(best, 0.5 * spec.u * r_val);
    }
    res.tail_bound_log = -best;
    return res;
}

// Default truncation: four times the rescaled hitting scale u * t_hat.
inline double default_t_cap(const RiskSpec& spec) {
    spec.validate_infinite_horizon();
    double worst = 0.0;
    for (std::uint32_t mask : k_subsets(spec.dim(), spec.k)) {
        std::vector<int> idx = detail::mask_to_indices(mask, spec.dim());
        RiskSpec sub = spec.restricted(idx);
        RateFunction rf = rate_function(sub.model, sub.a, sub.c, idx);
        worst = std::max(worst, rf.t_hat);
    }
    return 4.0 * spec.u * worst;
}

// Conditional failure-time samples for k = d: first grid time where all
// components are failed, retained when it lands in [S,T], rescaled to
// u^2 (T - tau).
struct FailureTimeResult {
    std::vector<double> rescaled;  // u^2 (T - tau)
    double rate = 0.0;             // a~^T Sigma^{-1} a~ / (2 T^2)
    SimResult sim;
};

inline FailureTimeResult sample_failure_time(const RiskSpec& spec, int n_steps,
                                             const SimOptions& opts_in) {
    spec.validate_basic();
    require(!spec.infinite_horizon, "failure-time sampling requires a finite horizon");
    require(spec.k == spec.dim(), "failure-time law is stated for k = d");
    double min_steps = 64.0 * spec.u * spec.u;
    require(n_steps >= min_steps, "failure-time sampling needs n_steps >= 64 u^2");

    SimOptions opts = opts_in;
    opts.record_times = true;
    FailureTimeResult out;
    out.sim = simulate_psi(spec, make_sim_grid(spec, n_steps), opts, /*monitor_from_zero=*/true);
    for (double tau : out.sim.hitting_times)
        if (tau >= spec.s_start - 1e-12)
            out.rescaled.push_back(spec.u * spec.u * (spec.t_end - tau));
    if (out.rescaled.size() < 200) {
        std::ostringstream os;
        os << "only " << out.rescaled.size()
           << " conditional samples (need 200); lower u or raise n_rep";
        throw InsufficientHitsError(os.str());
    }
    QpSolution sol = solve_pi_sigma(spec.model, spec.a);
    out.rate = sol.value / (2.0 * spec.t_end * spec.t_end);
    return out;
}

struct KsResult {
    double statistic = 0.0;  // one-sided D+
    double critical = 0.0;   // 1% level
    bool pass = false;
    std::size_t n = 0;
};

// One-sided Kolmogorov-Smirnov check of samples against Exp(rate):
// D+ = sup_x (F_n(x) - F(x)), the direction grid bias pushes the samples.
inline KsResult ks_against_exponential(std::vector<double> samples, double rate,
                                       double level = 0.01) {
    require(samples.size() >= 200, "KS check needs at least 200 samples");
    require(rate > 0.0, "rate must be positive");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d_plus = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = 1.0 - std::exp(-rate * std::max(0.0, samples[i]));
        d_plus = std::max(d_plus, (static_cast<double>(i + 1)) / n - f);
    }
    KsResult r;
    r.statistic = d_plus;
    r.critical = std::sqrt(std::log(1.0 / level) / (2.0 * n));
    r.pass = d_plus < r.critical;
    r.n = samples.size();
    return r;
}

// Per-subset hit indicators and their pairwise joint hits on shared paths:
// inputs for the Bonferroni bracket.
struct SubsetEventEstimates {
    std::map<std::uint32_t, McEstimate> per_subset;
    std::map<std::pair<std::uint32_t, std::uint32_t>, McEstimate> pairwise;
};

inline SubsetEventEstimates simulate_subset_events(const RiskSpec& spec,
                                                   const std::vector<std::uint32_t>& subsets,
                                                   const PathGrid& grid, const SimOptions& opts) {
    spec.validate_basic();
    require(!spec.infinite_horizon, "subset events require a finite horizon");
    const int d = spec.dim();
    const int n = grid.n_steps();
    const int ns = static_cast<int>(subsets.size());
    const detail::PackedChol L(spec.model);
    std::vector<double> thr(static_cast<std::size_t>(n + 1) * d);
    std::vector<char> monitored(n + 1);
    for (int j = 0; j <= n; ++j) {
        monitored[j] = grid.times[j] >= spec.s_start - 1e-12;
        for (int i = 0; i < d; ++i)
            thr[static_cast<std::size_t>(j) * d + i] = spec.a[i] * spec.u + spec.c[i] * grid.times[j];
    }

    ChunkPlan plan(opts.n_rep);
    std::vector<std::vector<double>> counts(plan.n_chunks),
        pair_counts(plan.n_chunks);
    run_chunks(plan, opts.n_threads, [&](std::uint64_t c) {
        counts[c].assign(ns, 0.0);
        pair_counts[c].assign(static_cast<std::size_t>(ns) * ns, 0.0);
        thread_local std::vector<double> w, z, dz;
        thread_local std::vector<char> hit;
        for (std::uint64_t rep = plan.begin(c); rep < plan.end(c); ++rep) {
            RandomStream rng(opts.seed, rep);
            w.assign(d, 0.0);
            z.assign(d, 0.0);
            dz.assign(d, 0.0);
            hit.assign(ns, 0);
            int remaining = ns;
            double t_prev = 0.0;
            for (int j = 0; j <= n && remaining > 0; ++j) {
                double t = grid.times[j];
                double dt = t - t_prev;
                if (dt > 0.0) {
                    double sq = std::sqrt(dt);
                    for (int i = 0; i < d; ++i) z[i] = sq * rng.normal();
                    L.mulvec(z.data(), dz.data());
                    for (int i = 0; i < d; ++i) w[i] += dz[i];
                }
                t_prev = t;
                if (!monitored[j]) continue;
                const double* th = &thr[static_cast<std::size_t>(j) * d];
                for (int s = 0; s < ns; ++s) {
                    if (hit[s]) continue;
                    bool all = true;
                    for (int i = 0; i < d && all; ++i)
                        if ((subsets[s] & (1u << i)) && w[i] <= th[i]) all = false;
                    if (all) {
                        hit[s] = 1;
                        --remaining;
                    }
                }
            }
            for (int s = 0; s < ns; ++s)
                if (hit[s]) {
                    counts[c][s] += 1.0;
                    for (int s2 = s + 1; s2 < ns; ++s2)
                        if (hit[s2]) pair_counts[c][static_cast<std::size_t>(s) * ns + s2] += 1.0;
                }
        }
    });

    SubsetEventEstimates out;
    for (int s = 0; s < ns; ++s) {
        double total = 0.0;
        for (std::uint64_t c = 0; c < plan.n_chunks; ++c) total += counts[c][s];
        out.per_subset[subsets[s]] =
            McEstimate::from_moments(total, total, opts.n_rep, opts.seed, true);
    }
    for (int s = 0; s < ns; ++s)
        for (int s2 = s + 1; s2 < ns; ++s2) {
            double total = 0.0;
            for (std::uint64_t c = 0; c < plan.n_chunks; ++c)
                total += pair_counts[c][static_cast<std::size_t>(s) * ns + s2];
            out.pairwise[{subsets[s], subsets[s2]}] =
                McEstimate::from_moments(total, total, opts.n_rep, opts.seed, true);
        }
    return out;
}

}  // namespace brm
