#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "brm/qp.hpp"

using namespace brm;

namespace {

Matrix random_pd(int d, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = nd(gen);
    return g * g.transpose() + 0.05 * Matrix::Identity(d, d);
}

Vector random_a(int d, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    Vector a(d);
    bool pos = false;
    do {
        for (int i = 0; i < d; ++i) a[i] = nd(gen);
        pos = false;
        for (int i = 0; i < d; ++i)
            if (a[i] > 0) pos = true;
    } while (!pos);
    return a;
}

}  // namespace

TEST_CASE("identity example") {
    auto m = CovModel::from_sigma(Matrix::Identity(2, 2));
    Vector a = Vector::Constant(2, 1.0);
    auto sol = solve_pi_sigma(m, a);
    CHECK(sol.index_I == std::vector<int>{0, 1});
    CHECK(sol.a_tilde.isApprox(a));
    CHECK(sol.lambda.isApprox(Vector::Constant(2, 1.0)));
    CHECK(sol.value == Catch::Approx(2.0));
    CHECK(sol.index_U.empty());
}

TEST_CASE("inactive component example") {
    Matrix s(2, 2);
    s << 1, 0.5, 0.5, 1;
    auto m = CovModel::from_sigma(s);
    Vector a(2);
    a << 1.0, 0.2;
    auto sol = solve_pi_sigma(m, a);
    CHECK(sol.index_I == std::vector<int>{0});
    CHECK(sol.index_J == std::vector<int>{1});
    CHECK(sol.index_U.empty());
    CHECK(sol.a_tilde[0] == Catch::Approx(1.0));
    CHECK(sol.a_tilde[1] == Catch::Approx(0.5));
    CHECK(sol.lambda[0] == Catch::Approx(1.0));
    CHECK(sol.lambda[1] == 0.0);
    CHECK(sol.value == Catch::Approx(1.0));
}

TEST_CASE("equi-correlated d=3 example") {
    auto m = CovModel::equicorrelated(3, 0.5);
    Vector a = Vector::Constant(3, 1.0);
    auto sol = solve_pi_sigma(m, a);
    CHECK(sol.m == 3);
    for (int i = 0; i < 3; ++i) CHECK(sol.lambda[i] == Catch::Approx(0.5).epsilon(1e-12));
    CHECK(sol.value == Catch::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("all-equal positive a has |I| >= 2 on correlation matrices") {
    // the claim needs a common diagonal: with unequal variances a single
    // active index can dominate (e.g. Sigma = [[1,9],[9,100]], a = (1,1))
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + static_cast<int>(gen() % 4);
        Matrix s = random_pd(d, gen);
        Vector scale = s.diagonal().cwiseSqrt().cwiseInverse();
        Matrix corr = scale.asDiagonal() * s * scale.asDiagonal();
        auto sol = solve_pi_sigma(CovModel::from_sigma(corr), Vector::Constant(d, 1.0));
        CHECK(sol.m >= 2);
        CHECK(sol.m <= d);
    }
    // the unequal-diagonal counterexample itself
    Matrix bad(2, 2);
    bad << 1.0, 9.0, 9.0, 100.0;
    auto sol = solve_pi_sigma(CovModel::from_sigma(bad), Vector::Constant(2, 1.0));
    CHECK(sol.m == 1);
    CHECK(sol.a_tilde[1] == Catch::Approx(9.0));
}

TEST_CASE("rejects all-nonpositive a and oversized problems") {
    auto m = CovModel::from_sigma(Matrix::Identity(2, 2));
    Vector bad = Vector::Constant(2, -1.0);
    CHECK_THROWS_AS(solve_pi_sigma(m, bad), AllNonpositiveError);
    auto big = CovModel::from_sigma(Matrix::Identity(13, 13));
    CHECK_THROWS_AS(solve_pi_sigma(big, Vector::Constant(13, 1.0)), ValidationError);
}

TEST_CASE("uniqueness of the passing active set") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        int d = 2 + static_cast<int>(gen() % 5);
        Matrix sigma = random_pd(d, gen);
        Vector a = random_a(d, gen);
        int passing = 0;
        for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
            auto cand = detail::evaluate_active_set(sigma, a, mask, 1e-9);
            if (cand.pass) ++passing;
        }
        CHECK(passing == 1);
    }
}

TEST_CASE("optimality against random feasible points") {
    std::mt19937_64 gen(99);
    std::exponential_distribution<double> ed(1.0);
    auto m = CovModel::from_sigma(random_pd(4, gen));
    Vector a = random_a(4, gen);
    auto sol = solve_pi_sigma(m, a);
    // certificate invariants
    for (int i : sol.index_I) {
        CHECK(sol.a_tilde[i] == a[i]);
        CHECK(sol.lambda[i] > 0.0);
    }
    for (int j : sol.index_J) CHECK(sol.a_tilde[j] >= a[j] - 1e-9);
    CHECK(sol.a_tilde.dot(m.solve(sol.a_tilde)) == Catch::Approx(sol.value).epsilon(1e-9));
    for (int trial = 0; trial < 1000; ++trial) {
        Vector x(4);
        for (int i = 0; i < 4; ++i) x[i] = a[i] + ed(gen);
        CHECK(x.dot(m.solve(x)) >= sol.value - 1e-9);
    }
}

TEST_CASE("scale equivariance") {
    std::mt19937_64 gen(31);
    auto m = CovModel::from_sigma(random_pd(4, gen));
    Vector a = random_a(4, gen);
    auto sol = solve_pi_sigma(m, a);
    for (double kappa : {0.5, 2.0, 7.0}) {
        auto sk = solve_pi_sigma(m, (kappa * a).eval());
        CHECK(sk.index_I == sol.index_I);
        CHECK(sk.a_tilde.isApprox(kappa * sol.a_tilde, 1e-9));
        CHECK(sk.value == Catch::Approx(kappa * kappa * sol.value).epsilon(1e-9));
    }
}

TEST_CASE("time-scale covariance") {
    std::mt19937_64 gen(32);
    Matrix sigma = random_pd(3, gen);
    Vector a = random_a(3, gen);
    auto sol = solve_pi_sigma(CovModel::from_sigma(sigma), a);
    for (double t : {0.25, 3.0}) {
        auto st = solve_pi_sigma(CovModel::from_sigma((t * sigma).eval()), a);
        CHECK(st.index_I == sol.index_I);
        CHECK(st.a_tilde.isApprox(sol.a_tilde, 1e-9));
        CHECK(st.value == Catch::Approx(sol.value / t).epsilon(1e-9));
    }
}

TEST_CASE("representation identity") {
    Matrix s(2, 2);
    s << 1, 0.5, 0.5, 1;
    auto m = CovModel::from_sigma(s);
    Vector a(2);
    a << 1.0, 0.2;
    auto sol = solve_pi_sigma(m, a);

    Vector x(2);
    x << 3.0, -7.0;
    CHECK(verify_representation(m, sol, x, {0}));          // F = I
    CHECK(verify_representation(m, sol, x, {0, 1}));       // F = full set
    CHECK_THROWS_AS(verify_representation(m, sol, x, {1}), ValidationError);

    std::mt19937_64 gen(55);
    std::normal_distribution<double> nd;
    auto m4 = CovModel::from_sigma(random_pd(4, gen));
    Vector a4 = random_a(4, gen);
    auto sol4 = solve_pi_sigma(m4, a4);
    for (int trial = 0; trial < 100; ++trial) {
        Vector x4(4);
        for (int i = 0; i < 4; ++i) x4[i] = 3.0 * nd(gen);
        CHECK(verify_representation(m4, sol4, x4, sol4.index_I));
    }
}
