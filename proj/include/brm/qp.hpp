#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "brm/cov_model.hpp"

namespace brm {

/// Solution of the quadratic program: minimise x^T Sigma^{-1} x over x >= a.
/// The active set I carries strictly positive duals, J is its complement and
/// U the subset of J where the solution touches the constraint.
struct QpSolution {
    Vector a_tilde;           // the minimiser
    std::vector<int> index_I;  // 0-based, sorted
    std::vector<int> index_J;
    std::vector<int> index_U;
    Vector lambda;            // Sigma^{-1} a_tilde; zero off I
    double value = 0.0;       // a_tilde^T Sigma^{-1} a_tilde
    int m = 0;                // |I|
    bool boundary_degenerate = false;

    std::uint32_t mask_I() const {
        std::uint32_t m2 = 0;
        for (int i : index_I) m2 |= (1u << i);
        return m2;
    }
};

namespace detail {

inline std::vector<int> mask_to_indices(std::uint32_t mask, int d) {
    std::vector<int> idx;
    for (int i = 0; i < d; ++i)
        if (mask & (1u << i)) idx.push_back(i);
    return idx;
}

struct QpCandidate {
    std::uint32_t mask = 0;
    Vector lambda_I;
    Vector a_tilde;
    double value = 0.0;
    double margin = 0.0;  // worst slack against the KKT conditions
    bool pass = false;
};

// Evaluate the KKT certificate of one candidate active set.
// Conditions (with tolerance tau): lambda_I = Sigma_II^{-1} a_I > tau and
// a_tilde_J = Sigma_JI lambda_I >= a_J - tau.
inline QpCandidate evaluate_active_set(const Matrix& sigma, const Vector& a,
                                       std::uint32_t mask, double tau) {
    const int d = static_cast<int>(a.size());
    QpCandidate cand;
    cand.mask = mask;
    std::vector<int> I = mask_to_indices(mask, d);
    const int m = static_cast<int>(I.size());
    Matrix sII(m, m);
    Vector aI(m);
    for (int r = 0; r < m; ++r) {
        aI[r] = a[I[r]];
        for (int c = 0; c < m; ++c) sII(r, c) = sigma(I[r], I[c]);
    }
    Eigen::LLT<Matrix> llt(sII);
    if (llt.info() != Eigen::Success) {
        cand.margin = -std::numeric_limits<double>::infinity();
        return cand;
    }
    cand.lambda_I = llt.solve(aI);

    cand.a_tilde = Vector(d);
    double margin = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
        cand.a_tilde[I[r]] = aI[r];
        margin = std::min(margin, cand.lambda_I[r]);
    }
    for (int j = 0; j < d; ++j) {
        if (mask & (1u << j)) continue;
        double v = 0.0;
        for (int r = 0; r < m; ++r) v += sigma(j, I[r]) * cand.lambda_I[r];
        cand.a_tilde[j] = v;
        margin = std::min(margin, v - a[j]);
    }
    cand.value = aI.dot(cand.lambda_I);
    cand.margin = margin;
    bool lambda_ok = true, slack_ok = true;
    for (int r = 0; r < m; ++r)
        if (!(cand.lambda_I[r] > tau)) lambda_ok = false;
    for (int j = 0; j < d; ++j)
        if (!(mask & (1u << j)) && cand.a_tilde[j] < a[j] - tau) slack_ok = false;
    cand.pass = lambda_ok && slack_ok;
    return cand;
}

}  // namespace detail

/// Exhaustive active-set solve of Pi_Sigma(a). Exact for the small dimensions
/// used here (d <= 12); candidates are enumerated by increasing |I| so that a
/// boundary tie resolves to the smaller index set.
inline QpSolution solve_pi_sigma(const CovModel& model, const Vector& a,
                                 double tau_act = 1e-9) {
    const int d = model.dim();
    require(a.size() == d, "dimension mismatch");
    require(d <= 12, "active-set enumeration supports d <= 12");
    bool any_positive = false;
    for (int i = 0; i < d; ++i)
        if (a[i] > 0.0) any_positive = true;
    if (!any_positive)
        throw AllNonpositiveError("a must have at least one strictly positive component");

    std::vector<std::uint32_t> masks;
    masks.reserve((1u << d) - 1);
    for (std::uint32_t m = 1; m < (1u << d); ++m) masks.push_back(m);
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t x, std::uint32_t y) {
        int px = __builtin_popcount(x), py = __builtin_popcount(y);
        return px != py ? px < py : x < y;
    });

    std::vector<detail::QpCandidate> passing;
    detail::QpCandidate best_miss1, best_miss2;
    best_miss1.margin = best_miss2.margin = -std::numeric_limits<double>::infinity();
    for (std::uint32_t mask : masks) {
        detail::QpCandidate c = detail::evaluate_active_set(model.sigma(), a, mask, tau_act);
        if (c.pass) {
            passing.push_back(std::move(c));
        } else if (c.margin > best_miss1.margin) {
            best_miss2 = std::move(best_miss1);
            best_miss1 = std::move(c);
        } else if (c.margin > best_miss2.margin) {
            best_miss2 = std::move(c);
        }
    }
    if (passing.empty()) {
        std::ostringstream os;
        os << "no active set satisfies the KKT conditions within tolerance " << tau_act
           << "; best near-misses: mask " << best_miss1.mask << " (margin " << best_miss1.margin
           << "), mask " << best_miss2.mask << " (margin " << best_miss2.margin << ")";
        throw DegenerateError(os.str());
    }

    const detail::QpCandidate& win = passing.front();
    QpSolution sol;
    sol.a_tilde = win.a_tilde;
    sol.index_I = detail::mask_to_indices(win.mask, d);
    sol.m = static_cast<int>(sol.index_I.size());
    sol.lambda = Vector::Zero(d);
    for (int r = 0; r < sol.m; ++r) sol.lambda[sol.index_I[r]] = win.lambda_I[r];
    sol.value = win.value;
    for (int j = 0; j < d; ++j)
        if (!(win.mask & (1u << j))) {
            sol.index_J.push_back(j);
            if (std::abs(win.a_tilde[j] - a[j]) <= tau_act) sol.index_U.push_back(j);
        }
    sol.boundary_degenerate = passing.size() > 1;
    return sol;
}

/// Checks the reduction x^T Sigma^{-1} a_tilde = x_F^T (Sigma_FF)^{-1} a_tilde_F
/// for an index set F containing I.
inline bool verify_representation(const CovModel& model, const QpSolution& sol,
                                  const Vector& x, const std::vector<int>& F) {
    const int d = model.dim();
    require(x.size() == d, "dimension mismatch");
    for (int i : sol.index_I)
        if (std::find(F.begin(), F.end(), i) == F.end())
            throw ValidationError("F must contain the active set I");

    double lhs = x.dot(model.solve(sol.a_tilde));

    const int f = static_cast<int>(F.size());
    Matrix sFF(f, f);
    Vector aF(f), xF(f);
    for (int r = 0; r < f; ++r) {
        aF[r] = sol.a_tilde[F[r]];
        xF[r] = x[F[r]];
        for (int c = 0; c < f; ++c) sFF(r, c) = model.sigma()(F[r], F[c]);
    }
    double rhs = xF.dot(Eigen::LLT<Matrix>(sFF).solve(aF));
    return std::abs(lhs - rhs) <= 1e-8 * (1.0 + std::abs(lhs));
}

}  // namespace brm
