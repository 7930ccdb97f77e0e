#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brm/gauss.hpp"
#include "brm/mc.hpp"
#include "brm/risk_spec.hpp"

namespace brm {

// Sandwich bracket p_T <= psi_k <= K p_T.
struct BoundResult {
    McEstimate lower;                          // p_T
    McEstimate upper;                          // K * p_T
    double k_const = 1.0;
    std::map<std::uint32_t, McEstimate> per_subset_K_terms;
    std::vector<std::string> warnings;
};

// P(W(T) - cT has at least k components above a*u): single-time evaluation
// of the failure region, estimated by Monte Carlo with antithetics.
inline McEstimate p_T(const RiskSpec& spec, std::uint64_t n_rep, std::uint64_t seed,
                      int n_threads = 0) {
    spec.validate_basic();
    require(!spec.infinite_horizon, "p_T requires a finite horizon");
    require(spec.dim() <= 64, "p_T supports d <= 64");
    const int d = spec.dim();
    const double T = spec.t_end;
    const double sqT = std::sqrt(T);
    const detail::PackedChol L(spec.model);
    std::vector<double> thr(d);
    for (int i = 0; i < d; ++i) thr[i] = spec.a[i] * spec.u + spec.c[i] * T;
    return mc_mean(
        n_rep, seed, n_threads,
        [&](std::uint64_t rep) {
            RandomStream rng(seed, rep);
            double z[64], w[64];
            for (int i = 0; i < d; ++i) z[i] = sqT * rng.normal();
            L.mulvec(z, w);
            auto hit = [&](double sign) {
                int count = 0;
                for (int i = 0; i < d; ++i)
                    if (sign * w[i] >= thr[i]) ++count;
                return count >= spec.k ? 1.0 : 0.0;
            };
            return 0.5 * (hit(1.0) + hit(-1.0));
        },
        true);
}

struct KConstant {
    double value = 1.0;   // K
    double stderr_ = 0.0;  // delta-method propagation from the minimal subset
    std::map<std::uint32_t, McEstimate> per_subset;
    std::vector<std::string> warnings;
};

// K = 1 / min over |I|=k of P(for all i in I: W_i(T) > max(0, c_i T)).
// All subsets share the seed, so their estimates are coupled and comparable.
inline KConstant k_constant(const RiskSpec& spec, std::uint64_t n_rep, std::uint64_t seed,
                            int n_threads = 0) {
    spec.validate_basic();
    require(!spec.infinite_horizon, "k_constant requires a finite horizon");
    require(spec.dim() <= 20, "subset enumeration capped at d <= 20");
    KConstant out;
    auto subsets = k_subsets(spec.dim(), spec.k);
    if (subsets.size() > 100000)
        out.warnings.push_back("C(d,k) exceeds 1e5 subsets; expect a long run");

    const double T = spec.t_end;
    const double sqT = std::sqrt(T);
    McEstimate min_est;
    bool first = true;
    for (std::uint32_t mask : subsets) {
        LowerBounds lb = LowerBounds::all_unbounded(spec.dim());
        for (int i = 0; i < spec.dim(); ++i)
            if (mask & (1u << i)) {
                lb.unbounded[i] = false;
                // threshold for W(1) after scaling W(T) = sqrt(T) W(1)
                lb.value[i] = std::max(0.0, spec.c[i] * T) / sqT;
            }
        McEstimate est = mvn_survival(spec.model, lb, n_rep, seed, n_threads);
        if (est.value <= 5.0 * est.stderr_) {
            std::ostringstream os;
            os << "subset orthant probability indistinguishable from zero at 5 stderr "
               << "(estimate " << est.value << ", stderr " << est.stderr_ << ")";
            throw IllConditionedKError(os.str());
        }
        out.per_subset[mask] = est;
        if (first || est.value < min_est.value) {
            min_est = est;
            first = false;
        }
    }
    out.value = 1.0 / min_est.value;
    out.stderr_ = min_est.stderr_ / (min_est.value * min_est.value);
    return out;
}

inline BoundResult sandwich(const RiskSpec& spec, std::uint64_t n_rep, std::uint64_t seed,
                            int n_threads = 0) {
    BoundResult res;
    res.lower = p_T(spec, n_rep, derive_seed(seed, 0x70), n_threads);
    KConstant K = k_constant(spec, n_rep, derive_seed(seed, 0x71), n_threads);
    res.k_const = K.value;
    res.per_subset_K_terms = K.per_subset;
    res.warnings = K.warnings;
    res.upper.value = K.value * res.lower.value;
    // K and p_T come from independent streams
    res.upper.stderr_ = std::sqrt(K.value * K.value * res.lower.stderr_ * res.lower.stderr_ +
                                  res.lower.value * res.lower.value * K.stderr_ * K.stderr_);
    const double z = 1.959963984540054;
    res.upper.ci_lo = res.upper.value - z * res.upper.stderr_;
    res.upper.ci_hi = res.upper.value + z * res.upper.stderr_;
    res.upper.n_rep = n_rep;
    res.upper.seed = seed;
    return res;
}

// Bonferroni bracket from per-subset and pairwise joint estimates.
inline std::pair<McEstimate, McEstimate> bonferroni(
    const RiskSpec& spec, const std::map<std::uint32_t, McEstimate>& per_subset,
    const std::map<std::pair<std::uint32_t, std::uint32_t>, McEstimate>& pairwise) {
    spec.validate_basic();
    auto subsets = k_subsets(spec.dim(), spec.k);
    double sum = 0.0, var = 0.0;
    for (std::uint32_t mask : subsets) {
        auto it = per_subset.find(mask);
        if (it == per_subset.end())
            throw ValidationError("per_subset is missing a k-subset estimate");
        sum += it->second.value;
        var += it->second.stderr_ * it->second.stderr_;
    }
    double pair_sum = 0.0, pair_var = 0.0;
    for (const auto& [key, est] : pairwise) {
        (void)key;
        pair_sum += est.value;
        pair_var += est.stderr_ * est.stderr_;
    }
    McEstimate upper;
    upper.value = sum;
    upper.stderr_ = std::sqrt(var);
    McEstimate lower;
    lower.value = std::max(0.0, sum - pair_sum);
    lower.stderr_ = std::sqrt(var + pair_var);
    const double z = 1.959963984540054;
    for (McEstimate* e : {&lower, &upper}) {
        e->ci_lo = e->value - z * e->stderr_;
        e->ci_hi = e->value + z * e->stderr_;
    }
    return {lower, upper};
}

}  // namespace brm
