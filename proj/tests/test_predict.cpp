#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <basisglasso/error.hpp>
#include <basisglasso/graphs.hpp>
#include <basisglasso/predict.hpp>

#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace bgl;

TEST_CASE("kriging agrees with the dense GP")
{
    auto rng = make_rng(61);
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = 5 + static_cast<Index>(rng() % 20);
        const Index ell = 1 + static_cast<Index>(rng() % 6);
        const Matrix po = test::random_matrix(n, ell, rng);
        const Matrix pp = test::random_matrix(7, ell, rng);
        const Matrix Q = test::random_spd(ell, rng);
        const double tau2 = test::uniform(rng, 0.1, 5.0);
        const Vector y = test::random_matrix(n, 1, rng).col(0);
        for (bool nug : {true, false}) {
            const auto a = krige(po, pp, Q, tau2, y, nug);
            const auto b = test::dense_kriging(po, pp, Q, tau2, y, nug);
            CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("batch kriging matches column-by-column")
{
    auto rng = make_rng(62);
    const Matrix po = test::random_matrix(15, 4, rng);
    const Matrix pp = test::random_matrix(5, 4, rng);
    const Matrix Q = test::random_spd(4, rng);
    const Matrix Y = test::random_matrix(15, 3, rng);
    const auto batch = krige_batch(po, pp, Q, 0.7, Y);
    for (Index k = 0; k < 3; ++k) {
        const auto one = krige(po, pp, Q, 0.7, Y.col(k));
        CHECK((batch.mean.col(k) - one.mean).norm() < 1e-12);
        CHECK((batch.variance - one.variance).norm() < 1e-12);
    }
    Vector bad = Y.col(0);
    bad(2) = NAN;
    CHECK_THROWS_AS(krige(po, pp, Q, 0.7, bad), DataError);
    CHECK_THROWS_AS(krige(po, pp, Q, 0.0, Y.col(0)), ConfigError);
}

TEST_CASE("CRPS")
{
    // at the mean: sigma (2 phi(0) - 1 / sqrt(pi))
    const double at_mean = 2.0 * (2.0 / std::sqrt(2 * std::numbers::pi) - 1.0 / std::sqrt(std::numbers::pi));
    CHECK(crps_gaussian(1.0, 2.0, 1.0) == doctest::Approx(at_mean));
    // far from the mean it approaches the absolute error
    CHECK(crps_gaussian(0.0, 1e-3, 5.0) == doctest::Approx(5.0).epsilon(1e-3));
    // numerical integral of (F(x) - 1{x >= y})^2
    const double mu = 0.3, sd = 1.7, y = -0.8;
    double integral = 0.0;
    const double h = 1e-3;
    for (double x = -30; x < 30; x += h) {
        const double xm = x + 0.5 * h;
        const double d = normal_cdf((xm - mu) / sd) - (xm >= y ? 1.0 : 0.0);
        integral += d * d * h;
    }
    CHECK(crps_gaussian(mu, sd, y) == doctest::Approx(integral).epsilon(1e-5));
    CHECK(crps_gaussian(0, 1, 0.5) == doctest::Approx(crps_gaussian(0, 1, -0.5)));
    CHECK_THROWS_AS(crps_gaussian(0, 0, 1), ConfigError);
}

TEST_CASE("effective df equals the hat-matrix trace")
{
    auto rng = make_rng(63);
    for (int rep = 0; rep < 10; ++rep) {
        const Index n = 10 + rep, ell = 2 + rep % 4;
        const Matrix phi = test::random_matrix(n, ell, rng);
        const Matrix Q = test::random_spd(ell, rng);
        const double tau2 = test::uniform(rng, 0.2, 3.0);
        Matrix sigma = phi * Q.inverse() * phi.transpose();
        sigma.diagonal().array() += tau2;
        const Matrix hat = phi * Q.inverse() * phi.transpose() * sigma.inverse();
        const double df = effective_df(Q, phi.transpose() * phi, tau2);
        CHECK(std::abs(df - hat.trace()) < 1e-10);
        CHECK(df > 0.0);
        CHECK(df < static_cast<double>(ell));
    }
}

TEST_CASE("replicate likelihood and AIC")
{
    auto rng = make_rng(64);
    const Matrix phi = test::random_matrix(12, 3, rng);
    const Matrix Y = test::random_matrix(12, 6, rng);
    const auto k = empirical_cov_projections(Y, phi);
    const Matrix Q = test::random_spd(3, rng);
    const double expect = 3.0 * (total_nll(Q, 0.9, k) + 12.0 * std::log(2 * std::numbers::pi));
    CHECK(replicate_nll(Q, 0.9, k) == doctest::Approx(expect));
    CHECK(aic(10.0, 2.5) == 25.0);
}

TEST_CASE("implied standard deviation and correlation")
{
    auto rng = make_rng(65);
    const Matrix phi = test::random_matrix(8, 3, rng);
    const Matrix Q = test::random_spd(3, rng);
    const Matrix cov = phi * Q.inverse() * phi.transpose();
    const Vector sd = implied_sd(phi, Q);
    const Vector sdn = implied_sd(phi, Q, 0.5, true);
    for (Index i = 0; i < 8; ++i) {
        CHECK(sd(i) == doctest::Approx(std::sqrt(cov(i, i))));
        CHECK(sdn(i) == doctest::Approx(std::sqrt(cov(i, i) + 0.5)));
    }
    const Vector corr = implied_correlation(phi, Q, phi.row(2).transpose());
    CHECK(corr(2) == doctest::Approx(1.0));
    for (Index i = 0; i < 8; ++i)
        CHECK(corr(i) == doctest::Approx(cov(i, 2) / std::sqrt(cov(i, i) * cov(2, 2))));
    Matrix with_zero = phi;
    with_zero.row(0).setZero();
    CHECK(std::isnan(implied_correlation(with_zero, Q, phi.row(1).transpose())(0)));
}

TEST_CASE("neighborhood")
{
    Matrix q = Matrix::Identity(4, 4);
    q(0, 2) = q(2, 0) = -0.3;
    q(1, 2) = q(2, 1) = 0.01;
    const auto all = neighborhood(q, 2, 0.0);
    CHECK(all.size() == 2);
    const auto strong = neighborhood(q, 2, 0.1);
    REQUIRE(strong.size() == 1);
    CHECK(strong[0].index == 0);
    CHECK(strong[0].value == -0.3);
    CHECK_FALSE(strong[0].location.has_value());
    const auto grid = build_single_grid({}, 2, 2, 2.5);
    const auto located = neighborhood(q, 2, 0.1, &grid);
    REQUIRE(located[0].location.has_value());
    CHECK((*located[0].location)[0] == 0.0);
    CHECK_THROWS_AS(neighborhood(q, 4, 0.0), ConfigError);
}

TEST_CASE("recovery metrics")
{
    const auto truth = gen_band(5);
    // exact recovery
    const auto same = recovery_metrics(truth.Q, truth.Q);
    CHECK(same.rel_frobenius == 0.0);
    CHECK(same.pct_missed_zeros == 0.0);
    CHECK(same.pct_missed_nonzeros == 0.0);
    CHECK(*same.kl_conventional == doctest::Approx(0.0).scale(1.0));

    // the diagonal misses all 4 true edges and none of the 6 true zeros
    const Matrix diag = Matrix(truth.Q.diagonal().asDiagonal());
    const auto d = recovery_metrics(diag, truth.Q);
    CHECK(d.pct_missed_nonzeros == 100.0);
    CHECK(d.pct_missed_zeros == 0.0);
    CHECK(d.rel_frobenius == doctest::Approx(std::sqrt(8.0) / truth.Q.norm()));

    // a full estimate flags every true zero
    Matrix full = truth.Q;
    for (Index j = 0; j < 5; ++j)
        for (Index i = 0; i < 5; ++i)
            if (full(i, j) == 0.0)
                full(i, j) = 0.01;
    CHECK(recovery_metrics(full, truth.Q).pct_missed_zeros == 100.0);
    CHECK(recovery_metrics(full, truth.Q, 0.05).pct_missed_zeros == 0.0);

    // divergences against dense formulas
    auto rng = make_rng(66);
    const Matrix a = test::random_spd(4, rng), b = test::random_spd(4, rng);
    const auto r = recovery_metrics(a, b);
    const double lit = (a * b).trace() - test::dense_logdet(a) - test::dense_logdet(b) - 4.0;
    const double conv =
        0.5 * ((b.inverse() * a).trace() - test::dense_logdet(a) + test::dense_logdet(b) - 4.0);
    CHECK(*r.kl_score == doctest::Approx(lit));
    CHECK(*r.kl_conventional == doctest::Approx(conv));
    CHECK(*r.kl_conventional >= 0.0);

    // the literal score vanishes at Q_hat = Q^{-1}
    CHECK(std::abs(*recovery_metrics(b.inverse(), b).kl_score) < 1e-10);

    const auto bad = recovery_metrics(-a, b);
    CHECK_FALSE(bad.kl_score.has_value());
    CHECK_FALSE(bad.kl_diagnostic.empty());
}
