#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "brm/asymptotics.hpp"

using namespace brm;

namespace {

RiskSpec make_spec(Matrix sigma, Vector a, Vector c, double u, int k, double S = 0.0,
                   double T = 1.0, bool inf = false) {
    return RiskSpec{CovModel::from_sigma(std::move(sigma)), std::move(a), std::move(c),
                    u, k, S, T, inf};
}

double psi1_exact(double x, double c, double T) {
    double sq = std::sqrt(T);
    return norm_sf((x + c * T) / sq) + std::exp(-2.0 * c * x) * norm_sf((x - c * T) / sq);
}

}  // namespace

TEST_CASE("estimate_E one-dimensional analytic value") {
    auto m = CovModel::from_sigma(Matrix::Identity(1, 1));
    Vector a = Vector::Constant(1, 1.0);
    Vector lam = Vector::Constant(1, 1.0);
    // int P(exists t: B(t)-t > x) e^x dx = 2 exactly
    auto e = estimate_E(m, a, lam, 30.0, 0, 400000, 2025);
    CHECK(std::abs(e.value - 2.0) < 3.0 * e.stderr_);
    CHECK(e.stderr_ < 0.05);
}

TEST_CASE("estimate_E degenerate truncation at zero") {
    auto m = CovModel::from_sigma(Matrix::Identity(2, 2));
    Vector a = Vector::Constant(2, 1.0);
    Vector lam(2);
    lam << 0.5, 2.0;
    auto e = estimate_E(m, a, lam, 0.0, 0, 1000, 1);
    CHECK(e.value == Catch::Approx(1.0 / (0.5 * 2.0)).epsilon(1e-12));
    CHECK(e.stderr_ == 0.0);

    Vector bad(2);
    bad << 1.0, -0.5;
    CHECK_THROWS_AS(estimate_E(m, a, bad, 1.0, 0, 1000, 1), ValidationError);
}

TEST_CASE("estimate_E monotone in the truncation") {
    auto m = CovModel::from_sigma(Matrix::Identity(2, 2));
    Vector a = Vector::Constant(2, 1.0);
    Vector lam = Vector::Constant(2, 1.0);
    auto e5 = estimate_E(m, a, lam, 5.0, 0, 150000, 7);
    auto e10 = estimate_E(m, a, lam, 10.0, 0, 150000, 8);
    CHECK(e5.value <= e10.value + 3.0 * std::hypot(e5.stderr_, e10.stderr_));
}

TEST_CASE("constant_C in one dimension is 2") {
    auto m = CovModel::from_sigma(Matrix::Identity(1, 1));
    PickandsOptions opts;
    opts.n_rep = 300000;
    opts.seed = 11;
    auto pe = constant_C(m, Vector::Constant(1, 1.0), Vector::Constant(1, 0.7), opts);
    CHECK(pe.prefactor == Catch::Approx(1.0));
    CHECK(pe.cond_prob.value == 1.0);  // U empty
    CHECK(std::abs(pe.c_of_a.value - 2.0) < 3.0 * pe.c_of_a.stderr_);
}

TEST_CASE("constant_C positive and continuous under scaling") {
    auto m = CovModel::from_sigma(Matrix::Identity(2, 2));
    PickandsOptions opts;
    opts.n_rep = 60000;
    opts.seed = 3;
    Vector c = Vector::Zero(2);
    auto p1 = constant_C(m, Vector::Constant(2, 1.0), c, opts);
    auto p2 = constant_C(m, Vector::Constant(2, 1.05), c, opts);
    CHECK(p1.c_of_a.value > 0.0);
    CHECK(p2.c_of_a.value > 0.0);
    CHECK(std::abs(p1.c_of_a.value - p2.c_of_a.value) < 0.5);
}

TEST_CASE("tail asymptotic p1 against Mills ratios") {
    PickandsOptions opts;
    opts.n_rep = 100000;
    opts.seed = 5;

    // d=1: formula gives phi(u)/u, exact tail is Phibar(u); ratio is the
    // Mills ratio, within 7% at u=4
    auto s1 = make_spec(Matrix::Identity(1, 1), Vector::Constant(1, 1.0), Vector::Zero(1),
                        4.0, 1);
    auto a1 = tail_asymptotic_p1(s1, opts);
    double mills = norm_sf(4.0) / a1.value;
    CHECK(std::abs(mills - 1.0) < 0.07);

    // d=2 independent: product of Mills ratios
    auto s2 = make_spec(Matrix::Identity(2, 2), Vector::Constant(2, 1.0), Vector::Zero(2),
                        4.0, 2);
    auto a2 = tail_asymptotic_p1(s2, opts);
    double exact2 = norm_sf(4.0) * norm_sf(4.0);
    CHECK(std::abs(exact2 / a2.value - 1.0) < 0.15);

    // correlated with inactive component: I = {1}, U empty, formula is
    // lambda_1^{-1} u^{-1} phi_Sigma(u a~), validated against mvn_survival
    // (u = 4 keeps the survival probability reachable by plain Monte Carlo)
    Matrix rho(2, 2);
    rho << 1, 0.5, 0.5, 1;
    Vector a(2);
    a << 1.0, 0.2;
    auto s3 = make_spec(rho, a, Vector::Zero(2), 4.0, 2);
    auto a3 = tail_asymptotic_p1(s3, opts);
    CHECK(a3.terms[0].qp.index_U.empty());
    auto m3 = CovModel::from_sigma(rho);
    Vector lower = 4.0 * a;
    auto mc = mvn_survival(m3, LowerBounds::all_finite(lower), 25000000, 17);
    CHECK(std::abs(mc.value / a3.value - 1.0) < 0.15);
}

TEST_CASE("rate function closed forms in one dimension") {
    auto m = CovModel::from_sigma(Matrix::Identity(1, 1));

    auto rf1 = rate_function(m, Vector::Constant(1, 1.0), Vector::Constant(1, 1.0));
    CHECK(rf1.t_hat == Catch::Approx(1.0).margin(1e-6));
    CHECK(rf1.r_min == Catch::Approx(4.0).epsilon(1e-10));

    auto rf2 = rate_function(m, Vector::Constant(1, 2.0), Vector::Constant(1, 3.0));
    CHECK(rf2.t_hat == Catch::Approx(2.0 / 3.0).margin(1e-6));
    CHECK(rf2.r_min == Catch::Approx(24.0).epsilon(1e-10));

    CHECK_THROWS_AS(rate_function(m, Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)),
                    NoMinimizerError);
}

TEST_CASE("rate function convexity probe") {
    Matrix s(2, 2);
    s << 1.0, 0.4, 0.4, 1.3;
    auto m = CovModel::from_sigma(s);
    Vector a(2);
    a << 1.0, 0.5;
    Vector c(2);
    c << 0.8, 0.6;
    auto rf = rate_function(m, a, c);
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> ut(0.05, 8.0), ua(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        double t1 = ut(gen), t2 = ut(gen), al = ua(gen);
        double lhs = rf.r(al * t1 + (1 - al) * t2);
        double rhs = al * rf.r(t1) + (1 - al) * rf.r(t2);
        CHECK(lhs <= rhs + 1e-8);
    }
    // divergence at both ends
    CHECK(rf.r(1e-4) > rf.r(rf.t_hat) + 1.0);
    CHECK(rf.r(1e4) > rf.r(rf.t_hat) + 1.0);
}

TEST_CASE("argmin invariance under joint scaling") {
    Matrix s(2, 2);
    s << 1.0, -0.2, -0.2, 0.8;
    auto m = CovModel::from_sigma(s);
    Vector a(2);
    a << 1.0, 0.3;
    Vector c(2);
    c << 0.5, 1.0;
    auto rf = rate_function(m, a, c);
    double kappa = 2.5;
    auto rfk = rate_function(m, (kappa * a).eval(), (kappa * c).eval());
    CHECK(rfk.t_hat == Catch::Approx(rf.t_hat).margin(1e-5));
    CHECK(rfk.r_min == Catch::Approx(kappa * kappa * rf.r_min).epsilon(1e-7));
}

TEST_CASE("infinite horizon log-rate closed forms") {
    for (auto [av, cv] : {std::pair{1.0, 1.0}, {2.0, 3.0}, {0.5, 2.0}}) {
        auto spec = make_spec(Matrix::Identity(1, 1), Vector::Constant(1, av),
                              Vector::Constant(1, cv), 3.0, 1, 0.0, 1.0, true);
        auto est = infinite_horizon_lograte(spec);
        double expect = 2.0 * av * cv * spec.u;
        CHECK(-est.log_value == Catch::Approx(expect).epsilon(1e-10));
    }

    // two independent components, k=1: the smaller rate dominates
    Vector a(2), c(2);
    a << 1.0, 2.0;
    c << 1.0, 0.5;
    auto spec2 = make_spec(Matrix::Identity(2, 2), a, c, 2.0, 1, 0.0, 1.0, true);
    auto est2 = infinite_horizon_lograte(spec2);
    double expect = std::min(2.0 * 1.0 * 1.0, 2.0 * 2.0 * 0.5) * spec2.u;
    CHECK(-est2.log_value == Catch::Approx(expect).epsilon(1e-10));
    CHECK(est2.regime == Regime::infinite_horizon_lograte);
}

TEST_CASE("psi_k self-similarity across horizons") {
    Matrix s(2, 2);
    s << 1.0, 0.25, 0.25, 1.0;
    PickandsOptions opts;
    opts.n_rep = 50000;
    opts.seed = 404;
    for (double T : {0.25, 4.0}) {
        auto spec_T = make_spec(s, Vector::Constant(2, 1.0), Vector::Constant(2, 0.3),
                                2.0, 2, 0.0, T);
        auto manual = spec_T.reduced_to_unit_horizon();
        auto est_T = psi_k_asymptotic(spec_T, opts);
        auto est_1 = psi_k_asymptotic(manual, opts);
        CHECK(est_T.value == est_1.value);  // identical streams, identical output
    }
}

TEST_CASE("equi-correlated closed forms") {
    // krue reduction for a = 1: lambda_i = 1/(1 + rho (m-1))
    for (double rho : {-0.2, 0.0, 0.3, 0.7}) {
        for (int d : {3, 5}) {
            Vector a = Vector::Constant(d, 1.0);
            auto sol = equi_solve(a, rho);
            REQUIRE(sol.full_index);
            double expect = 1.0 / (1.0 + rho * (d - 1));
            for (int i = 0; i < d; ++i)
                CHECK(sol.lambda_full[i] == Catch::Approx(expect).epsilon(1e-13));
        }
    }

    // full-index criterion flips at a_d = 2 rho / (1 + rho) for a = (1,1,x)
    double rho = 0.4;
    double threshold = 2.0 * rho / (1.0 + rho);
    Vector a(3);
    a << 1.0, 1.0, threshold + 1e-3;
    CHECK(equi_solve(a, rho).full_index);
    CHECK(equi_full_index(a, rho));
    a[2] = threshold - 1e-3;
    CHECK_FALSE(equi_solve(a, rho).full_index);
    CHECK_FALSE(equi_full_index(a, rho));

    // closed form matches the general active-set solver
    std::mt19937_64 gen(77);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 40; ++trial) {
        int d = 2 + static_cast<int>(gen() % 4);
        double r = -0.8 / (d - 1) + 1.6 / (d - 1) * std::uniform_real_distribution<double>(
                                                        0.05, 0.95)(gen);
        Vector av(d);
        bool pos = false;
        for (int i = 0; i < d; ++i) {
            av[i] = nd(gen);
            pos = pos || av[i] > 0;
        }
        if (!pos) av[0] = std::abs(av[0]) + 0.1;
        auto closed = equi_solve(av, r);
        auto general = solve_pi_sigma(CovModel::equicorrelated(d, r), av);
        CHECK(closed.index_I == general.index_I);
        CHECK(closed.value == Catch::Approx(general.value).epsilon(1e-9));
        for (int i = 0; i < d; ++i)
            CHECK(closed.lambda_full[i] == Catch::Approx(general.lambda[i]).margin(1e-9));
    }
}

TEST_CASE("dominant pair selection") {
    Matrix s(3, 3);
    s << 1.0, 0.6, 0.2, 0.6, 1.0, 0.2, 0.2, 0.2, 1.0;
    Vector c = Vector::Zero(3);
    auto pairs = dominant_pairs(s, c);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0] == std::pair<int, int>{0, 1});

    // tie on correlation broken by drift sum
    Matrix t = Matrix::Identity(3, 3);
    t(0, 1) = t(1, 0) = 0.5;
    t(1, 2) = t(2, 1) = 0.5;
    Vector c2(3);
    c2 << 0.0, 0.0, 1.0;
    auto pairs2 = dominant_pairs(t, c2);
    REQUIRE(pairs2.size() == 1);
    CHECK(pairs2[0] == std::pair<int, int>{1, 2});
}

TEST_CASE("equicorrelated estimate composes the pieces") {
    PickandsOptions opts;
    opts.n_rep = 50000;
    opts.seed = 6;
    auto est = equicorrelated_closed_forms(3, 0.5, 1.0, 0.0, 2, 2.5, opts);
    CHECK(est.terms.size() == 3);  // C(3,2)
    double lam = 1.0 / (1.0 + 0.5);
    for (const auto& t : est.terms)
        for (int i = 0; i < 2; ++i)
            CHECK(t.qp.lambda[i] == Catch::Approx(lam).epsilon(1e-12));
    CHECK(est.value > 0.0);
    CHECK(est.value == Catch::Approx(3.0 * est.terms[0].value).epsilon(1e-12));
}
