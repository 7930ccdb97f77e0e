#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "brm/bounds.hpp"
#include "brm/gauss.hpp"
#include "brm/qp.hpp"
#include "brm/risk_spec.hpp"

namespace brm {

struct PickandsEstimate {
    double lambda_cap = 0.0;  // truncation of the time integral
    McEstimate value;         // E([0, lambda_cap])
    double prefactor = 1.0;   // prod_{i in I} lambda_i
    McEstimate cond_prob;     // P(W_U(1) > c_U | W_I(1) > c_I); 1 when U empty
    McEstimate c_of_a;        // prefactor * E
};

enum class Regime { finite_horizon, infinite_horizon_lograte };

struct SubsetTerm {
    std::vector<int> subset;  // 0-based global indices
    double value = 0.0;
    QpSolution qp;
    std::optional<PickandsEstimate> pickands;
    double lograte = 0.0;  // infinite horizon: (u/2) * min_t r(t)
    double t_hat = 0.0;
};

struct AsymptoticEstimate {
    double value = 0.0;
    double log_value = 0.0;
    Regime regime = Regime::finite_horizon;
    std::vector<SubsetTerm> terms;
    std::vector<std::vector<int>> dominant_subsets;
    std::vector<std::string> warnings;
};

struct PickandsOptions {
    std::uint64_t n_rep = 200000;
    std::uint64_t seed = 1;
    int n_threads = 0;
    double lambda0 = 8.0;
    int grid_steps = 0;            // 0: max(2048, 64*lambda)
    std::uint64_t cond_n_rep = 0;  // 0: n_rep
};

inline int default_e_grid(double lambda_cap) {
    return std::max(2048, static_cast<int>(64.0 * lambda_cap));
}

// Unbiased estimator of
//   E([0,L]) = int_{R^m} P(exists t in [0,L]: W_I(t) - t a_I > x) e^{lambda^T x} dx.
// Per path the box measure of {x < M} (M the per-coordinate running maximum)
// is prod_i e^{lambda_i M_i} / lambda_i; sampling x_i = M_i - Exp(1)/lambda_i
// and weighting by that measure thins the box down to the union of orthants.
// Per-coordinate maxima are sampled exactly through the cell-wise Brownian
// bridge maximum, so the weight carries no grid bias; only the joint
// exceedance indicator (m >= 2) is evaluated on the grid.
inline McEstimate estimate_E(const CovModel& model_I, const Vector& a_I, const Vector& lambda_I,
                             double lambda_cap, int grid_steps, std::uint64_t n_rep,
                             std::uint64_t seed, int n_threads = 0) {
    const int m = model_I.dim();
    require(a_I.size() == m && lambda_I.size() == m, "dimension mismatch");
    require(lambda_cap >= 0.0, "lambda_cap must be nonnegative");
    for (int i = 0; i < m; ++i)
        require(lambda_I[i] > 0.0, "lambda must be strictly positive on I");
    if (grid_steps <= 0) grid_steps = default_e_grid(lambda_cap);

    double log_prefactor = 0.0;
    for (int i = 0; i < m; ++i) log_prefactor -= std::log(lambda_I[i]);

    if (lambda_cap == 0.0) {
        // single node t=0: M = 0, x < 0 componentwise, indicator always 1
        McEstimate e;
        e.value = std::exp(log_prefactor);
        e.ci_lo = e.ci_hi = e.value;
        e.n_rep = n_rep;
        e.seed = seed;
        return e;
    }

    const int n = grid_steps;
    const double dt = lambda_cap / n;
    const double sqdt = std::sqrt(dt);
    const detail::PackedChol L(model_I);
    std::vector<double> var_diag(m);
    for (int i = 0; i < m; ++i) var_diag[i] = model_I.sigma()(i, i) * dt;

    return mc_mean(n_rep, seed, n_threads, [&](std::uint64_t rep) {
        RandomStream rng(seed, rep);
        thread_local std::vector<double> y, z, dz, maxima, path;
        y.assign(m, 0.0);
        z.assign(m, 0.0);
        dz.assign(m, 0.0);
        maxima.assign(m, 0.0);
        if (m > 1) path.assign(static_cast<std::size_t>(m) * (n + 1), 0.0);
        double t = 0.0;
        for (int j = 1; j <= n; ++j) {
            for (int i = 0; i < m; ++i) z[i] = sqdt * rng.normal();
            L.mulvec(z.data(), dz.data());
            t += dt;
            for (int i = 0; i < m; ++i) {
                double y_prev = y[i];
                y[i] += dz[i] - a_I[i] * dt;
                if (m > 1) path[static_cast<std::size_t>(j) * m + i] = y[i];
                // exact cell maximum via the bridge; the sqrt only runs when
                // the cell can actually raise the running maximum
                double e = rng.exponential();
                double g0 = maxima[i] - y_prev, g1 = maxima[i] - y[i];
                if (g0 > 0.0 && g1 > 0.0 && e * var_diag[i] <= 2.0 * g0 * g1) continue;
                double cell = 0.5 * (y_prev + y[i] +
                                     std::sqrt((y[i] - y_prev) * (y[i] - y_prev) +
                                               2.0 * var_diag[i] * e));
                if (cell > maxima[i]) maxima[i] = cell;
            }
        }
        double log_w = log_prefactor;
        for (int i = 0; i < m; ++i) log_w += lambda_I[i] * maxima[i];
        double weight = std::exp(log_w);
        if (m == 1) return weight;  // x < M iff the path exceeds x somewhere

        std::vector<double> x(m);
        for (int i = 0; i < m; ++i) x[i] = maxima[i] - rng.exponential() / lambda_I[i];
        for (int j = 0; j <= n; ++j) {
            bool all = true;
            for (int i = 0; i < m; ++i)
                if (path[static_cast<std::size_t>(j) * m + i] <= x[i]) {
                    all = false;
                    break;
                }
            if (all) return weight;
        }
        return 0.0;
    });
}

namespace detail {

inline McEstimate exact_one() {
    McEstimate e;
    e.value = 1.0;
    e.ci_lo = e.ci_hi = 1.0;
    return e;
}

// P(W_U(1) > c_U | W_I(1) > c_I) as a ratio of two coupled survival
// indicators on a shared stream; conditionally binomial, so the ratio's
// standard error is sqrt(R(1-R)/n_den).
inline McEstimate conditional_factor(const CovModel& model, const std::vector<int>& I,
                                     const std::vector<int>& U, const Vector& c,
                                     std::uint64_t n_rep, std::uint64_t seed, int n_threads) {
    if (U.empty()) return exact_one();
    std::vector<int> IU = I;
    IU.insert(IU.end(), U.begin(), U.end());
    std::sort(IU.begin(), IU.end());
    CovModel sub = model.restricted(IU);
    const int ds = sub.dim();
    std::vector<double> thr(ds);
    std::vector<bool> in_I(ds, false);
    for (int r = 0; r < ds; ++r) {
        thr[r] = c[IU[r]];
        in_I[r] = std::find(I.begin(), I.end(), IU[r]) != I.end();
    }
    const detail::PackedChol L(sub);
    ChunkPlan plan(n_rep);
    std::vector<std::uint64_t> den_counts(plan.n_chunks, 0), num_counts(plan.n_chunks, 0);
    run_chunks(plan, n_threads, [&](std::uint64_t chunk) {
        std::uint64_t den = 0, num = 0;
        double z[64], w[64];
        for (std::uint64_t rep = plan.begin(chunk); rep < plan.end(chunk); ++rep) {
            RandomStream rng(seed, rep);
            for (int i = 0; i < ds; ++i) z[i] = rng.normal();
            L.mulvec(z, w);
            bool den_ok = true, num_ok = true;
            for (int i = 0; i < ds; ++i) {
                if (w[i] <= thr[i]) {
                    num_ok = false;
                    if (in_I[i]) { den_ok = false; break; }
                }
            }
            if (den_ok) {
                ++den;
                if (num_ok) ++num;
            }
        }
        den_counts[chunk] = den;
        num_counts[chunk] = num;
    });
    std::uint64_t den = 0, num = 0;
    for (std::uint64_t c2 = 0; c2 < plan.n_chunks; ++c2) {
        den += den_counts[c2];
        num += num_counts[c2];
    }
    if (den == 0)
        throw NumericalError("conditioning event W_I(1) > c_I never hit; cannot estimate factor");
    McEstimate e;
    e.value = static_cast<double>(num) / static_cast<double>(den);
    e.stderr_ = std::sqrt(std::max(0.0, e.value * (1.0 - e.value) / static_cast<double>(den)));
    const double zq = 1.959963984540054;
    e.ci_lo = e.value - zq * e.stderr_;
    e.ci_hi = e.value + zq * e.stderr_;
    e.n_rep = n_rep;
    e.seed = seed;
    return e;
}

}  // namespace detail

// Pickands-type constant C(a) = prod_{i in I} lambda_i * lim_L E([0,L]).
// The truncation doubles from lambda0 until successive estimates agree within
// two joint standard errors; the limit is finite with geometrically decaying
// increments, so the doubling terminates quickly in practice.
inline PickandsEstimate constant_C(const CovModel& model, const Vector& a, const Vector& c,
                                   const PickandsOptions& opts) {
    QpSolution sol = solve_pi_sigma(model, a);
    CovModel model_I = model.restricted(sol.index_I);
    Vector a_I(sol.m), lambda_I(sol.m);
    for (int r = 0; r < sol.m; ++r) {
        a_I[r] = a[sol.index_I[r]];
        lambda_I[r] = sol.lambda[sol.index_I[r]];
    }

    PickandsEstimate pe;
    pe.prefactor = 1.0;
    for (int r = 0; r < sol.m; ++r) pe.prefactor *= lambda_I[r];

    double lambda_cap = opts.lambda0;
    McEstimate prev;
    bool have_prev = false;
    bool converged = false;
    int lambda_idx = 0;
    while (lambda_cap <= 64.0 * opts.lambda0 + 1e-9) {
        McEstimate cur = estimate_E(model_I, a_I, lambda_I, lambda_cap, opts.grid_steps,
                                    opts.n_rep, derive_seed(opts.seed, 0xE0, lambda_idx),
                                    opts.n_threads);
        if (have_prev) {
            double joint = std::sqrt(prev.stderr_ * prev.stderr_ + cur.stderr_ * cur.stderr_);
            if (std::abs(cur.value - prev.value) < 2.0 * joint) {
                pe.value = cur;
                pe.lambda_cap = lambda_cap;
                converged = true;
                break;
            }
        }
        prev = cur;
        have_prev = true;
        lambda_cap *= 2.0;
        ++lambda_idx;
    }
    if (!converged) {
        std::ostringstream os;
        os << "E([0,L]) did not stabilise up to L = " << 64.0 * opts.lambda0
           << "; last estimates " << prev.value << " +- " << prev.stderr_;
        throw TruncationNotConvergedError(os.str());
    }

    std::uint64_t cn = opts.cond_n_rep ? opts.cond_n_rep : opts.n_rep;
    pe.cond_prob = detail::conditional_factor(model, sol.index_I, sol.index_U, c, cn,
                                              derive_seed(opts.seed, 0xC0), opts.n_threads);
    pe.c_of_a = pe.value.scaled(pe.prefactor);
    return pe;
}

namespace detail {

// Density factor of the tail expansion: the marginal density of W_I(1) at
// u a_I + c_I. (The active-set marginal is the form the dominated-convergence
// argument actually produces; the full-dimensional density is off by the
// J-block Gaussian normalisation whenever J is non-empty.)
inline double tail_density_I(const CovModel& model, const QpSolution& sol, double u,
                             const Vector& a, const Vector& c) {
    CovModel model_I = model.restricted(sol.index_I);
    Vector arg(sol.m);
    for (int r = 0; r < sol.m; ++r) arg[r] = u * a[sol.index_I[r]] + c[sol.index_I[r]];
    return mvn_pdf(model_I, arg);
}

}  // namespace detail

// Right side of the Gaussian-tail expansion of p_1(a u):
//   prod lambda_i^{-1} * P(W_U > c_U | W_I > c_I) * u^{-|I|} * phi_I(u a_I + c_I).
inline AsymptoticEstimate tail_asymptotic_p1(const RiskSpec& spec_in,
                                             const PickandsOptions& opts) {
    RiskSpec spec = spec_in.infinite_horizon
                        ? throw ValidationError("p1 asymptotic needs a finite horizon")
                        : spec_in.reduced_to_unit_horizon();
    QpSolution sol = solve_pi_sigma(spec.model, spec.a);
    McEstimate cond =
        detail::conditional_factor(spec.model, sol.index_I, sol.index_U, spec.c,
                                   opts.cond_n_rep ? opts.cond_n_rep : opts.n_rep,
                                   derive_seed(opts.seed, 0xC0), opts.n_threads);
    double log_pref = 0.0;
    for (int i : sol.index_I) log_pref -= std::log(sol.lambda[i]);
    double density = detail::tail_density_I(spec.model, sol, spec.u, spec.a, spec.c);
    double value =
        std::exp(log_pref - sol.m * std::log(spec.u)) * cond.value * density;

    AsymptoticEstimate est;
    est.regime = Regime::finite_horizon;
    est.value = value;
    est.log_value = value > 0.0 ? std::log(value) : -std::numeric_limits<double>::infinity();
    SubsetTerm term;
    term.subset.resize(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) term.subset[i] = i;
    term.value = value;
    term.qp = sol;
    PickandsEstimate pe;
    pe.cond_prob = cond;
    pe.prefactor = std::exp(-log_pref);
    term.pickands = pe;
    est.terms.push_back(std::move(term));
    est.dominant_subsets.push_back(est.terms[0].subset);
    return est;
}

// Time-scaled rate function r_I(t) = min_{x >= a_I + c_I t} x^T Sigma_II^{-1} x / t
// with its unique minimizer, located by golden-section search after bracketing
// by doubling (valid by convexity and divergence at both ends).
struct RateFunction {
    std::vector<int> subset;
    std::function<double(double)> r;
    double t_hat = 0.0;
    double r_min = 0.0;
};

inline RateFunction rate_function(const CovModel& model_I, const Vector& a_I,
                                  const Vector& c_I, std::vector<int> subset = {}) {
    const int m = model_I.dim();
    require(a_I.size() == m && c_I.size() == m, "dimension mismatch");
    bool c_positive = false;
    for (int i = 0; i < m; ++i)
        if (c_I[i] > 0.0) c_positive = true;
    if (!c_positive)
        throw NoMinimizerError("c_I has no positive component; r may be non-coercive");

    auto r = [model_I, a_I, c_I](double t) {
        require(t > 0.0, "rate function is defined for t > 0");
        Vector shifted = a_I + c_I * t;
        bool any_pos = false;
        for (int i = 0; i < shifted.size(); ++i)
            if (shifted[i] > 0.0) any_pos = true;
        if (!any_pos) return 0.0;  // origin feasible
        return solve_pi_sigma(model_I, shifted).value / t;
    };

    double t_hi = 1.0;
    int guard = 0;
    while (r(t_hi) <= r(t_hi * 0.5) && guard++ < 200) t_hi *= 2.0;
    if (guard >= 200) throw NumericalError("failed to bracket the rate minimizer from above");
    double t_lo = t_hi * 0.25;
    guard = 0;
    while (r(t_lo) <= r(t_lo * 2.0) && guard++ < 200) t_lo *= 0.5;
    if (guard >= 200) throw NumericalError("failed to bracket the rate minimizer from below");

    const double gr = 0.6180339887498949;  // 1/phi
    double a = t_lo, b = t_hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = r(x1), f2 = r(x2);
    while (b - a > 1e-8) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = r(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = r(x2);
        }
    }
    RateFunction rf;
    rf.subset = std::move(subset);
    rf.t_hat = 0.5 * (a + b);
    rf.r_min = r(rf.t_hat);
    rf.r = r;
    return rf;
}


// Subset-sum approximation psi_k(S,1,au) ~ sum_{|I|=k} C(a_I) psi_|I|(0,1,a_I u),
// each subset term expanded through the Pickands constant and the Gaussian
// tail formula. Horizons other than 1 are reduced by self-similarity. The
// per-subset constants are independent of the threshold scale, so a u-sweep
// computes them once and reuses them.
class PsiKEvaluator {
public:
    PsiKEvaluator(const RiskSpec& spec_in, const PickandsOptions& opts) {
        spec_ = spec_in.reduced_to_unit_horizon();
        spec_.validate_finite_asymptotics();
        sqrt_T_ = std::sqrt(spec_in.t_end);
        std::uint64_t subset_idx = 0;
        for (std::uint32_t mask : k_subsets(spec_.dim(), spec_.k)) {
            std::vector<int> idx = detail::mask_to_indices(mask, spec_.dim());
            RiskSpec sub = spec_.restricted(idx);
            bool any_pos = false;
            for (int i = 0; i < sub.dim(); ++i)
                if (sub.a[i] > 0.0) any_pos = true;
            if (!any_pos) {
                std::ostringstream os;
                os << "subset {";
                for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i] + 1;
                os << "} skipped: restricted a has no positive component";
                warnings_.push_back(os.str());
                ++subset_idx;
                continue;
            }
            PickandsOptions sub_opts = opts;
            sub_opts.seed = derive_seed(opts.seed, 0x5B, subset_idx);
            Cached c;
            c.subset = idx;
            c.sub = sub;
            c.pickands = constant_C(sub.model, sub.a, sub.c, sub_opts);
            c.qp = solve_pi_sigma(sub.model, sub.a);
            cached_.push_back(std::move(c));
            ++subset_idx;
        }
    }

    // Plugs a raw threshold scale u (original horizon) into the cached terms.
    AsymptoticEstimate evaluate(double u_raw) const {
        double u = u_raw / sqrt_T_;
        AsymptoticEstimate est;
        est.regime = Regime::finite_horizon;
        double total = 0.0, best = -1.0;
        for (const auto& c : cached_) {
            double density = detail::tail_density_I(c.sub.model, c.qp, u, c.sub.a, c.sub.c);
            double term_value = c.pickands.value.value * c.pickands.cond_prob.value *
                                std::pow(u, -c.qp.m) * density;
            SubsetTerm term;
            term.subset = c.subset;
            term.value = term_value;
            term.qp = c.qp;
            term.pickands = c.pickands;
            est.terms.push_back(std::move(term));
            total += term_value;
            best = std::max(best, term_value);
        }
        est.value = total;
        est.log_value =
            total > 0.0 ? std::log(total) : -std::numeric_limits<double>::infinity();
        for (const auto& t : est.terms)
            if (t.value >= best * (1.0 - 1e-6)) est.dominant_subsets.push_back(t.subset);
        est.warnings = warnings_;
        return est;
    }

private:
    struct Cached {
        std::vector<int> subset;
        RiskSpec sub{CovModel::from_sigma(Matrix::Identity(1, 1)), Vector::Zero(1),
                     Vector::Zero(1), 1.0, 1, 0.0, 1.0, false};
        PickandsEstimate pickands;
        QpSolution qp;
    };
    RiskSpec spec_{CovModel::from_sigma(Matrix::Identity(1, 1)), Vector::Zero(1),
                   Vector::Zero(1), 1.0, 1, 0.0, 1.0, false};
    double sqrt_T_ = 1.0;
    std::vector<Cached> cached_;
    std::vector<std::string> warnings_;
};

inline AsymptoticEstimate psi_k_asymptotic(const RiskSpec& spec, const PickandsOptions& opts) {
    return PsiKEvaluator(spec, opts).evaluate(spec.u);
}

// Infinite-horizon exponential decay: per size-k subset the log-rate is
// (u/2) * min_t r_I(t); the overall rate is the smallest one. No prefactor
// is attached in this regime.
inline AsymptoticEstimate infinite_horizon_lograte(const RiskSpec& spec) {
    spec.validate_infinite_horizon();
    AsymptoticEstimate est;
    est.regime = Regime::infinite_horizon_lograte;
    est.warnings.push_back("log-rate only: no prefactor is available for T = infinity");

    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask : k_subsets(spec.dim(), spec.k)) {
        std::vector<int> idx = detail::mask_to_indices(mask, spec.dim());
        RiskSpec sub = spec.restricted(idx);
        RateFunction rf = rate_function(sub.model, sub.a, sub.c, idx);
        SubsetTerm term;
        term.subset = idx;
        term.t_hat = rf.t_hat;
        term.lograte = 0.5 * spec.u * rf.r_min;
        term.value = std::exp(-term.lograte);
        est.terms.push_back(std::move(term));
        best = std::min(best, est.terms.back().lograte);
    }
    est.log_value = -best;
    est.value = std::exp(-best);
    for (const auto& t : est.terms)
        if (t.lograte <= best * (1.0 + 1e-12)) est.dominant_subsets.push_back(t.subset);
    return est;
}

// ---- closed forms for the equi-correlated model ----

// lambda_I = (Sigma_II)^{-1} a_I in closed form for an equi-correlated
// correlation matrix.
inline Vector equi_lambda(const Vector& a_I, double rho) {
    const int m = static_cast<int>(a_I.size());
    double s = a_I.sum();
    double shift = rho * s / (1.0 + rho * (m - 1));
    return (a_I.array() - shift).matrix() / (1.0 - rho);
}

// Whether the full index set solves the QP: a_min > rho * sum a / (1 + rho(d-1)).
inline bool equi_full_index(const Vector& a, double rho) {
    double a_min = a.minCoeff();
    return a_min > rho * a.sum() / (1.0 + rho * (a.size() - 1));
}

struct EquiSolution {
    std::vector<int> index_I;  // original indices
    Vector lambda_full;        // on the full dimension, zero off I
    double value = 0.0;
    bool full_index = false;
};

// Closed-form solve of Pi_Sigma(a) for the equi-correlated correlation
// matrix: the active set is a prefix of the order statistics of a.
inline EquiSolution equi_solve(const Vector& a, double rho) {
    const int d = static_cast<int>(a.size());
    require(d >= 1, "empty problem");
    if (d > 1)
        require(rho > -1.0 / (d - 1) && rho < 1.0, "rho outside the positive definite range");
    bool any_pos = false;
    for (int i = 0; i < d; ++i)
        if (a[i] > 0.0) any_pos = true;
    if (!any_pos)
        throw AllNonpositiveError("a must have at least one strictly positive component");

    std::vector<int> order(d);
    for (int i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a[x] > a[y]; });

    for (int m = 1; m <= d; ++m) {
        Vector a_I(m);
        for (int r = 0; r < m; ++r) a_I[r] = a[order[r]];
        Vector lam = equi_lambda(a_I, rho);
        if (lam.minCoeff() <= 0.0) continue;
        double tilde_j = rho * a_I.sum() / (1.0 + rho * (m - 1));
        if (m < d && tilde_j < a[order[m]]) continue;
        EquiSolution sol;
        sol.index_I.assign(order.begin(), order.begin() + m);
        std::sort(sol.index_I.begin(), sol.index_I.end());
        sol.lambda_full = Vector::Zero(d);
        for (int r = 0; r < m; ++r) sol.lambda_full[order[r]] = lam[r];
        sol.value = a_I.dot(lam);
        sol.full_index = (m == d);
        return sol;
    }
    throw DegenerateError("no prefix active set satisfies the closed-form conditions");
}

// Dominant pairs for k=2 with unit thresholds: maximal correlation wins,
// ties broken by the larger drift sum; all achieving pairs are returned.
inline std::vector<std::pair<int, int>> dominant_pairs(const Matrix& sigma, const Vector& c) {
    const int d = static_cast<int>(sigma.rows());
    double best_rho = -2.0, best_c = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            double rho = sigma(i, j) / std::sqrt(sigma(i, i) * sigma(j, j));
            double cs = c[i] + c[j];
            if (rho > best_rho + 1e-12 ||
                (std::abs(rho - best_rho) <= 1e-12 && cs > best_c + 1e-12)) {
                best_rho = std::max(best_rho, rho);
                best_c = cs;
                out.clear();
                out.emplace_back(i, j);
            } else if (std::abs(rho - best_rho) <= 1e-12 && std::abs(cs - best_c) <= 1e-12) {
                out.emplace_back(i, j);
            }
        }
    return out;
}

inline double binomial_coeff(int n, int k) {
    double v = 1.0;
    for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
    return v;
}

// Example-style closed forms: equi-correlated model with equal thresholds and
// drifts. Every k-subset contributes the same term, so
// psi_k ~ binom(d,k) * C_sub * P(all of a k-subset above u a + c).
inline AsymptoticEstimate equicorrelated_closed_forms(int d, double rho, double a_scalar,
                                                      double c_scalar, int k, double u,
                                                      const PickandsOptions& opts) {
    require(k >= 1 && k <= d, "k must lie in [1, d]");
    require(a_scalar > 0.0, "closed forms assume a positive common threshold");
    CovModel model = CovModel::equicorrelated(d, rho);
    CovModel model_k = CovModel::equicorrelated(k, rho);

    Vector a_I = Vector::Constant(k, a_scalar);
    Vector lam = equi_lambda(a_I, rho);  // all components equal a/(1+rho(k-1))
    double prefactor = 1.0;
    for (int i = 0; i < k; ++i) prefactor *= lam[i];

    PickandsOptions sub_opts = opts;
    McEstimate E;
    double lambda_cap = opts.lambda0;
    McEstimate prev;
    bool have_prev = false, converged = false;
    int lambda_idx = 0;
    while (lambda_cap <= 64.0 * opts.lambda0 + 1e-9) {
        McEstimate cur = estimate_E(model_k, a_I, lam, lambda_cap, opts.grid_steps, opts.n_rep,
                                    derive_seed(opts.seed, 0xE0, lambda_idx), opts.n_threads);
        if (have_prev &&
            std::abs(cur.value - prev.value) <
                2.0 * std::sqrt(prev.stderr_ * prev.stderr_ + cur.stderr_ * cur.stderr_)) {
            E = cur;
            converged = true;
            break;
        }
        prev = cur;
        have_prev = true;
        lambda_cap *= 2.0;
        ++lambda_idx;
    }
    if (!converged)
        throw TruncationNotConvergedError("E([0,L]) did not stabilise for the closed form");

    // orthant factor P(forall i <= k: W_i(1) > u a + c)
    LowerBounds lb = LowerBounds::all_finite(Vector::Constant(k, u * a_scalar + c_scalar));
    McEstimate orthant = mvn_survival(model_k, lb, std::max<std::uint64_t>(opts.n_rep, 1000),
                                      derive_seed(opts.seed, 0x0F), opts.n_threads);

    double c_sub = prefactor * E.value;
    double binom = binomial_coeff(d, k);
    AsymptoticEstimate est;
    est.regime = Regime::finite_horizon;
    est.value = binom * c_sub * orthant.value;
    est.log_value =
        est.value > 0.0 ? std::log(est.value) : -std::numeric_limits<double>::infinity();

    QpSolution qp_k;
    qp_k.a_tilde = a_I;
    qp_k.index_I.resize(k);
    for (int i = 0; i < k; ++i) qp_k.index_I[i] = i;
    qp_k.lambda = lam;
    qp_k.value = a_I.dot(lam);
    qp_k.m = k;
    for (std::uint32_t mask : k_subsets(d, k)) {
        SubsetTerm term;
        term.subset = detail::mask_to_indices(mask, d);
        term.value = c_sub * orthant.value;
        term.qp = qp_k;
        PickandsEstimate pe;
        pe.lambda_cap = lambda_cap;
        pe.value = E;
        pe.prefactor = prefactor;
        pe.cond_prob = detail::exact_one();
        pe.c_of_a = E.scaled(prefactor);
        term.pickands = pe;
        est.dominant_subsets.push_back(term.subset);
        est.terms.push_back(std::move(term));
    }
    (void)model;
    return est;
}

}  // namespace brm
