#include "helpers.hpp"
#include "oracles.hpp"

#include <slope/path.hpp>
#include <slope/screening.hpp>
#include <slope/solver.hpp>

#include <doctest.h>

using namespace slope;

namespace {

IndexSet all_indices(Index p)
{
    IndexSet out(static_cast<std::size_t>(p));
    std::iota(out.begin(), out.end(), Index{0});
    return out;
}

SolverConfig tight()
{
    SolverConfig cfg;
    cfg.gap_tol = 1e-10;
    cfg.infeas_tol = 1e-8;
    return cfg;
}

struct Problem
{
    DenseMatrix x;
    Response y;
};

Problem random_problem(std::mt19937_64& rng, Family family, Index n, Index p)
{
    DenseMatrix x(n, p);
    for (auto& v : x.reshaped()) v = std::normal_distribution<double>()(rng);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(p);
    truth.head(std::min<Index>(3, p)).setConstant(0.8);
    const Eigen::VectorXd eta = x * truth;
    Eigen::VectorXd raw(n);
    for (Index i = 0; i < n; ++i) {
        const double e = std::normal_distribution<double>()(rng);
        switch (family) {
        case Family::gaussian: raw[i] = eta[i] + e; break;
        case Family::logistic: raw[i] = eta[i] + e > 0 ? 1 : 0; break;
        case Family::poisson: raw[i] = std::floor(std::exp(0.3 * eta[i]) + std::abs(e)); break;
        case Family::multinomial: raw[i] = 1 + (eta[i] + e > 0.5 ? 2 : eta[i] + e > -0.5 ? 1 : 0); break;
        }
    }
    auto s = standardize(Design(x), make_response(family, raw));
    return {s.design.dense(), s.response};
}

} // namespace

TEST_CASE("one coefficient soft thresholds")
{
    DenseMatrix x(1, 1);
    x << 1;
    const auto r = fista_solve(Design(x), make_response(Family::gaussian, vec({3})), lam({1}), all_indices(1),
                               vec({0}), tight());
    CHECK(r.converged);
    CHECK(r.beta[0] == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("orthonormal design reproduces the prox")
{
    const Design eye(DenseMatrix(DenseMatrix::Identity(2, 2)));
    const auto y = make_response(Family::gaussian, vec({4, 3}));
    const auto r = fista_solve(eye, y, lam({3, 1}), all_indices(2), vec({0, 0}), tight());
    CHECK(r.converged);
    CHECK((r.beta - vec({1.5, 1.5})).lpNorm<Eigen::Infinity>() <= 1e-8);

    const auto g = duality_gap(eye, y, vec({1.5, 1.5}), lam({3, 1}));
    CHECK(g.gap <= 1e-12);
    CHECK(g.infeasibility == 0.0);
}

TEST_CASE("penalty above the entry point gives zero")
{
    std::mt19937_64 rng(1);
    auto pr = random_problem(rng, Family::gaussian, 20, 8);
    const Design d(pr.x);
    const auto lambda = bh_lambda(8, 0.1);
    const double s1 = sigma_max(loss_gradient(d, pr.y, Eigen::VectorXd::Zero(8)), lambda);
    const auto r = fista_solve(d, pr.y, lambda.scaled(s1 * 1.01), all_indices(8), Eigen::VectorXd::Ones(8), tight());
    CHECK(r.beta.isZero());
    const auto g = duality_gap(d, pr.y, Eigen::VectorXd::Zero(8), lambda.scaled(s1));
    CHECK(g.infeasibility <= 1e-14);
}

TEST_CASE("weak duality at arbitrary points")
{
    std::mt19937_64 rng(2);
    for (auto family : {Family::gaussian, Family::logistic, Family::poisson, Family::multinomial}) {
        auto pr = random_problem(rng, family, 20, 6);
        const Design d(pr.x);
        const Index m = 6 * pr.y.coef_columns();
        const auto lambda = bh_lambda(m, 0.2).scaled(0.5);
        for (int rep = 0; rep < 10; ++rep) {
            const Eigen::VectorXd b = random_normal(rng, m, 0.3);
            const auto g = duality_gap(d, pr.y, b, lambda);
            CHECK(g.gap > 0.0);
            CHECK(g.relative_gap() == doctest::Approx(oracle::relative_gap(pr.x, family, pr.y.values,
                                                                           pr.y.classes, b, lambda.weights()))
                                          .epsilon(1e-8));
        }
    }
}

TEST_CASE("converged solves certify against an independent gap")
{
    std::mt19937_64 rng(3);
    for (auto family : {Family::gaussian, Family::logistic, Family::poisson, Family::multinomial}) {
        for (int rep = 0; rep < 5; ++rep) {
            auto pr = random_problem(rng, family, 30, 10);
            const Design d(pr.x);
            const Index m = 10 * pr.y.coef_columns();
            const auto lambda = bh_lambda(m, 0.1);
            const double s1 = sigma_max(loss_gradient(d, pr.y, Eigen::VectorXd::Zero(m)), lambda);
            const auto scaled = lambda.scaled(0.3 * s1);
            SolverConfig cfg;
            const auto r = fista_solve(d, pr.y, scaled, all_indices(m), Eigen::VectorXd::Zero(m), cfg);
            REQUIRE(r.converged);
            CHECK(r.relative_gap() <= cfg.gap_tol);
            CHECK(r.infeasibility <= cfg.infeas_tol);
            CHECK(oracle::relative_gap(pr.x, family, pr.y.values, pr.y.classes, r.beta, scaled.weights()) <=
                  cfg.gap_tol * (1 + 1e-6));
            CHECK(detect_violations(r.beta, r.gradient_full, scaled, 10 * cfg.infeas_tol).empty());
        }
    }
}

TEST_CASE("subset solves use the leading weights and leave the rest at zero")
{
    std::mt19937_64 rng(4);
    auto pr = random_problem(rng, Family::gaussian, 25, 10);
    const Design d(pr.x);
    const auto lambda = bh_lambda(10, 0.1).scaled(2.0);
    const IndexSet subset{1, 4, 7};
    const auto r = fista_solve(d, pr.y, lambda, subset, Eigen::VectorXd::Zero(10), tight());
    REQUIRE(r.converged);
    for (Index j = 0; j < 10; ++j) {
        if (!std::binary_search(subset.begin(), subset.end(), j)) CHECK(r.beta[j] == 0.0);
    }
    // Same answer as solving the column-selected problem outright.
    const Design sub = d.select_columns(subset);
    const auto direct = fista_solve(sub, pr.y, lambda.head(3), all_indices(3), Eigen::VectorXd::Zero(3), tight());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        CHECK(r.beta[subset[i]] == doctest::Approx(direct.beta[static_cast<Index>(i)]).epsilon(1e-6));
    }
    CHECK(r.gradient_full.size() == 10);
    CHECK(r.gradient_full.isApprox(loss_gradient(d, pr.y, r.beta)));

    CHECK_THROWS_AS(fista_solve(d, pr.y, lambda, IndexSet{3, 1}, Eigen::VectorXd::Zero(10)), std::invalid_argument);
}

TEST_CASE("gap is invariant to permuting predictors")
{
    std::mt19937_64 rng(5);
    auto pr = random_problem(rng, Family::logistic, 20, 6);
    const auto lambda = bh_lambda(6, 0.1);
    const Eigen::VectorXd b = random_normal(rng, 6, 0.3);
    IndexSet perm = all_indices(6);
    std::shuffle(perm.begin(), perm.end(), rng);
    DenseMatrix xp(20, 6);
    Eigen::VectorXd bp(6);
    for (Index j = 0; j < 6; ++j) {
        xp.col(j) = pr.x.col(perm[j]);
        bp[j] = b[perm[j]];
    }
    const auto a = duality_gap(Design(pr.x), pr.y, b, lambda);
    const auto c = duality_gap(Design(xp), pr.y, bp, lambda);
    CHECK(a.gap == doctest::Approx(c.gap).epsilon(1e-10));
    CHECK(a.infeasibility == doctest::Approx(c.infeasibility).epsilon(1e-10));
}

TEST_CASE("iteration cap is flagged, not fatal")
{
    std::mt19937_64 rng(6);
    auto pr = random_problem(rng, Family::logistic, 40, 20);
    const Design d(pr.x);
    SolverConfig cfg = tight();
    cfg.max_iterations = 2;
    const auto r = fista_solve(d, pr.y, bh_lambda(20, 0.1).scaled(0.5), all_indices(20), Eigen::VectorXd::Zero(20), cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
}

TEST_CASE("step size underflow is a solver failure")
{
    std::mt19937_64 rng(7);
    auto pr = random_problem(rng, Family::poisson, 20, 5);
    SolverConfig cfg;
    cfg.min_step = 1e300;
    CHECK_THROWS_AS(fista_solve(Design(pr.x), pr.y, bh_lambda(5, 0.1).scaled(0.01), all_indices(5), Eigen::VectorXd::Zero(5), cfg),
                    SolverFailure);
}

TEST_CASE("sparse and dense designs give the same fit")
{
    std::mt19937_64 rng(8);
    auto pr = random_problem(rng, Family::gaussian, 20, 6);
    const SparseMatrix sp = pr.x.sparseView();
    const auto lambda = bh_lambda(6, 0.1).scaled(0.5);
    const auto a = fista_solve(Design(pr.x), pr.y, lambda, all_indices(6), Eigen::VectorXd::Zero(6), tight());
    const auto b = fista_solve(Design(sp), pr.y, lambda, all_indices(6), Eigen::VectorXd::Zero(6), tight());
    CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() <= 1e-7);
}

TEST_CASE("near-interpolating problems reach tight gaps quickly")
{
    // Correlated columns, nearly as many predictors as rows, and a tiny
    // penalty: plain accelerated steps converge slowly here.
    std::mt19937_64 rng(21);
    for (Family family : {Family::gaussian, Family::logistic, Family::poisson}) {
        const Index n = 40;
        const Index p = 36;
        auto pr = random_problem(rng, family, n, p);
        const Eigen::VectorXd shared = random_normal(rng, n);
        for (Index j = 0; j < p; ++j) pr.x.col(j) = 0.6 * pr.x.col(j) + 0.8 * shared;
        const Design d(pr.x);
        const LambdaSeq base = bh_lambda(p, 0.1);
        const Eigen::VectorXd g0 = loss_gradient(d, pr.y, Coefficients::Zero(p));
        const LambdaSeq lambda = base.scaled(1e-3 * sigma_max(g0, base));
        SolverConfig cfg = tight();
        cfg.gap_tol = 1e-12;
        cfg.max_iterations = 5000;
        const auto r = fista_solve(d, pr.y, lambda, all_indices(p), Coefficients::Zero(p), cfg);
        INFO(to_string(family), " iterations ", r.iterations);
        CHECK(r.converged);
        CHECK(oracle::relative_gap(pr.x, family, pr.y.values, 1, r.beta, lambda.weights()) <= 1e-10);
    }
}
