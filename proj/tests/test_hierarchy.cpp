#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "uqkit/hierarchy.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace uqkit;

namespace {

hierarchy::LinearHM scalar_hm(double c, double k, double noise_var, double prior_mean,
                              double prior_var) {
    return hierarchy::LinearHM(VectorXd::Constant(1, c), MatrixXd::Constant(1, 1, k),
                               gaussian::SpdMatrix(MatrixXd::Constant(1, 1, noise_var)),
                               VectorXd::Constant(1, prior_mean),
                               gaussian::SpdMatrix(MatrixXd::Constant(1, 1, prior_var)));
}

} // namespace

TEST_CASE("scalar model: posterior mean 2.6 and variance 0.8 at z=3") {
    // prior mean 1, prior var 4, noise var 1, direct observation z = 3.
    const hierarchy::LinearHM hm = scalar_hm(0.0, 1.0, 1.0, 1.0, 4.0);
    const hierarchy::Retrieval r =
        hierarchy::predictive_distribution(hm, VectorXd::Constant(1, 3.0));
    REQUIRE_THAT(r.predictive_mean(0), Catch::Matchers::WithinAbs(2.6, 1e-12));
    REQUIRE_THAT(r.predictive_cov.matrix()(0, 0), Catch::Matchers::WithinAbs(0.8, 1e-12));
    REQUIRE_THAT(r.gain(0, 0), Catch::Matchers::WithinAbs(0.8, 1e-12));

    const hierarchy::ScalarUpdate u = hierarchy::univariate_update(1.0, 4.0, 1.0, 3.0);
    REQUIRE_THAT(u.mean, Catch::Matchers::WithinAbs(2.6, 1e-12));
    REQUIRE_THAT(u.var, Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("univariate update worked example and validation") {
    const hierarchy::ScalarUpdate u = hierarchy::univariate_update(0.0, 1.0, 1.0, 2.0);
    REQUIRE_THAT(u.mean, Catch::Matchers::WithinAbs(1.0, 1e-14));
    REQUIRE_THAT(u.var, Catch::Matchers::WithinAbs(0.5, 1e-14));
    REQUIRE_THROWS_AS(hierarchy::univariate_update(0.0, 0.0, 1.0, 2.0), InputError);
    REQUIRE_THROWS_AS(hierarchy::univariate_update(0.0, 1.0, -1.0, 2.0), InputError);
}

TEST_CASE("predictive distribution matches the joint-conditioning oracle") {
    std::mt19937_64 engine(314159);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> pdist(1, 6);
    std::uniform_int_distribution<int> ddist(1, 8);
    for (int rep = 0; rep < 40; ++rep) {
        const Eigen::Index p = pdist(engine);
        const Eigen::Index d = ddist(engine);
        const hierarchy::LinearHM hm = oracles::random_hm(engine, p, d);
        VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(engine);

        const hierarchy::Retrieval fast = hierarchy::predictive_distribution(hm, z);
        const gaussian::GaussianDist slow = oracles::joint_conditioning_posterior(hm, z);

        const double mean_scale = std::max(1.0, slow.mean().norm());
        const double cov_scale = std::max(1.0, slow.cov().norm());
        REQUIRE((fast.predictive_mean - slow.mean()).norm() / mean_scale < 1e-9);
        REQUIRE((fast.predictive_cov.matrix() - slow.cov()).norm() / cov_scale < 1e-9);

        // Conditioning on data can only sharpen each marginal.
        for (Eigen::Index j = 0; j < p; ++j)
            REQUIRE(fast.predictive_cov.matrix()(j, j) <=
                    hm.prior_cov().matrix()(j, j) * (1.0 + 1e-12));
    }
}

TEST_CASE("vanishing noise drives the gain toward a left inverse") {
    // With full-column-rank forward map and noise shrinking to zero the data
    // pin the state down exactly, so the gain composed with the forward map
    // collapses onto the identity.
    std::mt19937_64 engine(8128);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index p = 3, d = 5;
    MatrixXd k(d, p);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < p; ++j) k(i, j) = normal(engine);
    VectorXd c(d), mu(p), z(d);
    for (Eigen::Index i = 0; i < d; ++i) c(i) = normal(engine);
    for (Eigen::Index j = 0; j < p; ++j) mu(j) = normal(engine);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(engine);
    const gaussian::SpdMatrix prior(oracles::random_spd(engine, p));

    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
        const gaussian::SpdMatrix noise(eps * MatrixXd::Identity(d, d));
        const hierarchy::LinearHM hm(c, k, noise, mu, prior);
        const hierarchy::Retrieval r = hierarchy::predictive_distribution(hm, z);
        const double err = (r.gain * k - MatrixXd::Identity(p, p)).norm();
        REQUIRE(err < prev);
        prev = err;
    }
    REQUIRE(prev < 1e-6);
}

TEST_CASE("precision decomposition residual is tiny, rectangular K included") {
    std::mt19937_64 engine(2718);
    for (int rep = 0; rep < 40; ++rep) {
        std::uniform_int_distribution<int> pdist(1, 6);
        std::uniform_int_distribution<int> ddist(1, 8);
        const hierarchy::LinearHM hm = oracles::random_hm(engine, pdist(engine), ddist(engine));
        const MatrixXd s = hierarchy::detail::posterior_precision(hm).first;
        REQUIRE(hierarchy::precision_decomposition_residual(hm) / s.norm() < 1e-10);
    }
}

TEST_CASE("posterior mean is unbiased over the data marginal") {
    std::mt19937_64 engine(55);
    const hierarchy::LinearHM hm = oracles::random_hm(engine, 3, 5);
    const hierarchy::UnbiasednessCheck chk = hierarchy::unbiasedness_check(hm, 20000, 1234);
    for (Eigen::Index j = 0; j < 3; ++j) {
        REQUIRE_THAT(chk.analytic(j), Catch::Matchers::WithinAbs(hm.prior_mean()(j), 1e-14));
        REQUIRE(std::abs(chk.monte_carlo(j) - chk.analytic(j)) < 4.0 * chk.std_error(j));
    }
}

TEST_CASE("self-diagnosis: wm_tm_diagnostics(m, m) is unbiased with posterior spread") {
    std::mt19937_64 engine(808);
    const hierarchy::LinearHM hm = oracles::random_hm(engine, 4, 6);
    const hierarchy::TMDiagnostics diag = hierarchy::wm_tm_diagnostics(hm, hm);
    const hierarchy::TMDiagnostics naive = hierarchy::naive_wm_moments(hm);
    REQUIRE(diag.true_bias.norm() < 1e-10);
    REQUIRE((diag.true_uncertainty - naive.true_uncertainty).norm() /
                naive.true_uncertainty.norm() <
            1e-8);
    REQUIRE(naive.true_bias.norm() == 0.0);
}

TEST_CASE("mismatched prior mean: scalar bias -1") {
    // Working model centers the prior at 0, the generating model at 2; with
    // k=1, noise var 1, prior var 1 the estimator is yhat = z/2, so
    // E[yhat - y] = mu_T/2 - mu_T = -1 when mu_T = 2.
    const hierarchy::LinearHM wm = scalar_hm(0.0, 1.0, 1.0, 0.0, 1.0);
    const hierarchy::LinearHM tm = scalar_hm(0.0, 1.0, 1.0, 2.0, 1.0);
    const hierarchy::TMDiagnostics diag = hierarchy::wm_tm_diagnostics(wm, tm);
    REQUIRE_THAT(diag.true_bias(0), Catch::Matchers::WithinAbs(-1.0, 1e-12));

    const hierarchy::McBias mc = hierarchy::wm_tm_mc_bias(wm, tm, 200000, 31337);
    REQUIRE(std::abs(mc.bias(0) - (-1.0)) < 4.0 * mc.std_error(0));
}

TEST_CASE("working model with inflated noise: zero bias, wider true spread") {
    // Same prior, same forward map; the working model believes noise var 4
    // while the data really carry noise var 1. The estimator stays unbiased
    // but its actual spread differs from its self-report.
    const hierarchy::LinearHM wm = scalar_hm(0.0, 1.0, 4.0, 0.0, 1.0);
    const hierarchy::LinearHM tm = scalar_hm(0.0, 1.0, 1.0, 0.0, 1.0);
    const hierarchy::TMDiagnostics diag = hierarchy::wm_tm_diagnostics(wm, tm);
    const hierarchy::TMDiagnostics naive = hierarchy::naive_wm_moments(wm);
    REQUIRE_THAT(diag.true_bias(0), Catch::Matchers::WithinAbs(0.0, 1e-14));
    // gain = 1/5, A = -4/5: true spread = 16/25 + 1/25 = 0.68.
    REQUIRE_THAT(diag.true_uncertainty(0, 0), Catch::Matchers::WithinAbs(0.68, 1e-12));
    REQUIRE_THAT(naive.true_uncertainty(0, 0), Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("model construction validates dimensions") {
    REQUIRE_THROWS_AS(
        hierarchy::LinearHM(VectorXd::Zero(2), MatrixXd::Identity(1, 1),
                            gaussian::SpdMatrix(MatrixXd::Identity(1, 1)), VectorXd::Zero(1),
                            gaussian::SpdMatrix(MatrixXd::Identity(1, 1))),
        InputError);
    REQUIRE_THROWS_AS(
        hierarchy::LinearHM(VectorXd::Zero(1), MatrixXd::Identity(1, 1),
                            gaussian::SpdMatrix(MatrixXd::Identity(2, 2)), VectorXd::Zero(1),
                            gaussian::SpdMatrix(MatrixXd::Identity(1, 1))),
        InputError);
    const hierarchy::LinearHM ok = scalar_hm(0.0, 1.0, 1.0, 0.0, 1.0);
    REQUIRE_THROWS_AS(hierarchy::predictive_distribution(ok, VectorXd::Zero(2)), InputError);
    std::mt19937_64 engine(1);
    REQUIRE_THROWS_AS(hierarchy::wm_tm_diagnostics(ok, oracles::random_hm(engine, 2, 1)),
                      InputError);
}
