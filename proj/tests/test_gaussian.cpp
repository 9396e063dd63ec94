#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "uqkit/gaussian.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace uqkit;

namespace {

MatrixXd mat2(double a, double b, double c, double d) {
    MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

} // namespace

TEST_CASE("SpdMatrix accepts positive definite input and factors it") {
    const gaussian::SpdMatrix s(mat2(4.0, 1.0, 1.0, 1.0));
    REQUIRE(s.dim() == 2);
    const MatrixXd inv = s.inverse();
    REQUIRE_THAT((s.matrix() * inv - MatrixXd::Identity(2, 2)).norm(),
                 Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(s.log_det(), Catch::Matchers::WithinAbs(std::log(3.0), 1e-12));
}

TEST_CASE("SpdMatrix rejects bad input") {
    REQUIRE_THROWS_AS(gaussian::SpdMatrix(MatrixXd::Zero(2, 3)), InputError);
    REQUIRE_THROWS_AS(gaussian::SpdMatrix(MatrixXd(0, 0)), InputError);
    REQUIRE_THROWS_AS(gaussian::SpdMatrix(mat2(1.0, 0.5, -0.5, 1.0)), InputError);
    REQUIRE_THROWS_AS(gaussian::SpdMatrix(mat2(1.0, 2.0, 2.0, 1.0)), InputError);
    REQUIRE_THROWS_AS(gaussian::SpdMatrix(mat2(0.0, 0.0, 0.0, 0.0)), InputError);
}

TEST_CASE("is_spd distinguishes definite from indefinite") {
    REQUIRE(gaussian::is_spd(mat2(2.0, 0.3, 0.3, 1.0)));
    REQUIRE_FALSE(gaussian::is_spd(mat2(1.0, 2.0, 2.0, 1.0)));
    REQUIRE_FALSE(gaussian::is_spd(mat2(1.0, 0.5, -0.5, 1.0)));
}

TEST_CASE("GaussianDist accepts semi-definite covariance and rejects indefinite") {
    REQUIRE_NOTHROW(gaussian::GaussianDist(VectorXd::Zero(2), mat2(1.0, 1.0, 1.0, 1.0)));
    REQUIRE_THROWS_AS(gaussian::GaussianDist(VectorXd::Zero(2), mat2(1.0, 2.0, 2.0, 1.0)),
                      InputError);
    REQUIRE_THROWS_AS(gaussian::GaussianDist(VectorXd::Zero(3), mat2(1.0, 0.0, 0.0, 1.0)),
                      InputError);
}

TEST_CASE("conditioning a bivariate normal matches the closed form") {
    VectorXd mean(2);
    mean << 1.0, 2.0;
    const gaussian::GaussianDist joint(mean, mat2(4.0, 1.0, 1.0, 1.0));

    SECTION("observe the second coordinate") {
        VectorXd obs(1);
        obs << 3.0;
        const gaussian::GaussianDist post = gaussian::condition(joint, {1}, obs);
        REQUIRE(post.dim() == 1);
        REQUIRE_THAT(post.mean()(0), Catch::Matchers::WithinAbs(2.0, 1e-14));
        REQUIRE_THAT(post.cov()(0, 0), Catch::Matchers::WithinAbs(3.0, 1e-14));
    }
    SECTION("observe the first coordinate") {
        VectorXd obs(1);
        obs << 3.0;
        const gaussian::GaussianDist post = gaussian::condition(joint, {0}, obs);
        REQUIRE_THAT(post.mean()(0), Catch::Matchers::WithinAbs(2.5, 1e-14));
        REQUIRE_THAT(post.cov()(0, 0), Catch::Matchers::WithinAbs(0.75, 1e-14));
    }
}

TEST_CASE("conditioning input validation") {
    const gaussian::GaussianDist joint(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    const VectorXd v1 = VectorXd::Constant(1, 0.5);

    REQUIRE_THROWS_AS(gaussian::condition(joint, {3}, v1), InputError);
    REQUIRE_THROWS_AS(gaussian::condition(joint, {0, 0}, VectorXd::Zero(2)), InputError);
    REQUIRE_THROWS_AS(gaussian::condition(joint, {0, 1, 2}, VectorXd::Zero(3)), InputError);
    REQUIRE_THROWS_AS(gaussian::condition(joint, {0}, VectorXd::Zero(2)), InputError);

    const gaussian::GaussianDist same = gaussian::condition(joint, {}, VectorXd(0));
    REQUIRE(same.dim() == 3);
    REQUIRE(same.mean() == joint.mean());
}

TEST_CASE("conditioning on an uncorrelated coordinate changes nothing") {
    VectorXd mean(2);
    mean << -1.0, 5.0;
    const gaussian::GaussianDist joint(mean, mat2(2.0, 0.0, 0.0, 3.0));
    VectorXd obs(1);
    obs << 100.0;
    const gaussian::GaussianDist post = gaussian::condition(joint, {1}, obs);
    REQUIRE_THAT(post.mean()(0), Catch::Matchers::WithinAbs(-1.0, 1e-14));
    REQUIRE_THAT(post.cov()(0, 0), Catch::Matchers::WithinAbs(2.0, 1e-14));
}

TEST_CASE("conditioning a perfectly correlated pair pins the remainder") {
    const gaussian::GaussianDist joint(VectorXd::Zero(2), mat2(1.0, 1.0, 1.0, 1.0));
    VectorXd obs(1);
    obs << 0.7;
    const gaussian::GaussianDist post = gaussian::condition(joint, {0}, obs);
    REQUIRE_THAT(post.mean()(0), Catch::Matchers::WithinAbs(0.7, 1e-12));
    REQUIRE(post.cov()(0, 0) == 0.0);
}

TEST_CASE("sequential conditioning equals joint conditioning") {
    std::mt19937_64 engine(2024);
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index dim = 4;
        const MatrixXd cov = oracles::random_spd(engine, dim);
        VectorXd mean(dim);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < dim; ++i) mean(i) = normal(engine);
        const gaussian::GaussianDist joint(mean, cov);

        VectorXd obs(2);
        obs << normal(engine), normal(engine);

        // Condition on {1, 3} at once.
        const gaussian::GaussianDist both = gaussian::condition(joint, {1, 3}, obs);

        // Condition on 3 first, then on the remaining index of 1 (now 1).
        VectorXd second(1), first(1);
        second << obs(1);
        first << obs(0);
        const gaussian::GaussianDist step1 = gaussian::condition(joint, {3}, second);
        const gaussian::GaussianDist step2 = gaussian::condition(step1, {1}, first);

        REQUIRE_THAT((both.mean() - step2.mean()).norm(),
                     Catch::Matchers::WithinAbs(0.0, 1e-10));
        REQUIRE_THAT((both.cov() - step2.cov()).norm(),
                     Catch::Matchers::WithinAbs(0.0, 1e-10));
    }
}

TEST_CASE("conditional covariance never exceeds the marginal") {
    std::mt19937_64 engine(77);
    for (int rep = 0; rep < 50; ++rep) {
        const MatrixXd cov = oracles::random_spd(engine, 5);
        const gaussian::GaussianDist joint(VectorXd::Zero(5), cov);
        VectorXd obs(1);
        obs << 1.0;
        const gaussian::GaussianDist post = gaussian::condition(joint, {2}, obs);
        // Remaining coordinates are 0,1,3,4 in order.
        const std::vector<Eigen::Index> keep{0, 1, 3, 4};
        for (std::size_t a = 0; a < keep.size(); ++a)
            REQUIRE(post.cov()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) <=
                    cov(keep[a], keep[a]) + 1e-12);
    }
}

TEST_CASE("conditioning matches a Monte Carlo regression oracle") {
    // Independent route to the conditional moments: draw a large sample from
    // the joint, regress the free block on the observed block, and read the
    // conditional mean from the fitted line and the conditional covariance
    // from the residual covariance. The closed form must sit inside the
    // sampling error of that estimate.
    std::mt19937_64 engine(461976);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index n_draws = 1000000;
    struct Config {
        Eigen::Index dim;
        Eigen::Index n_obs;
        std::uint64_t sample_seed;
    };
    for (const Config cfg : {Config{6, 2, 11}, Config{20, 7, 12}}) {
        const Eigen::Index nf = cfg.dim - cfg.n_obs;
        VectorXd mean(cfg.dim);
        for (Eigen::Index i = 0; i < cfg.dim; ++i) mean(i) = normal(engine);
        const MatrixXd cov = oracles::random_spd(engine, cfg.dim);
        const gaussian::GaussianDist joint(mean, cov);

        // Observe the trailing block at a point near the center of its
        // marginal, so the free block is the leading block in both routes.
        std::vector<Eigen::Index> obs_idx;
        VectorXd v(cfg.n_obs);
        for (Eigen::Index k = 0; k < cfg.n_obs; ++k) {
            obs_idx.push_back(nf + k);
            v(k) = mean(nf + k) + 0.3 * normal(engine);
        }
        const gaussian::GaussianDist exact = gaussian::condition(joint, obs_idx, v);

        const MatrixXd draws = gaussian::sample(joint, cfg.sample_seed, n_draws);
        const Eigen::RowVectorXd mhat = draws.colwise().mean();
        const MatrixXd second =
            draws.transpose() * draws / static_cast<double>(n_draws);
        const MatrixXd shat = second - mhat.transpose() * mhat;
        const MatrixXd s_fo = shat.topRightCorner(nf, cfg.n_obs);
        const Eigen::LLT<MatrixXd> s_oo_llt(
            shat.bottomRightCorner(cfg.n_obs, cfg.n_obs));
        const MatrixXd slope = s_oo_llt.solve(s_fo.transpose()).transpose();
        const VectorXd mc_mean =
            mhat.head(nf).transpose() + slope * (v - mhat.tail(cfg.n_obs).transpose());
        const MatrixXd mc_cov = shat.topLeftCorner(nf, nf) - slope * s_fo.transpose();

        // Standard error of the fitted line at v: residual variance over n,
        // inflated by the Mahalanobis offset of v from the observed center.
        const VectorXd dv = v - mean.tail(cfg.n_obs);
        const MatrixXd cov_oo = cov.bottomRightCorner(cfg.n_obs, cfg.n_obs);
        const double maha2 = dv.dot(Eigen::LLT<MatrixXd>(cov_oo).solve(dv));
        for (Eigen::Index j = 0; j < nf; ++j) {
            const double se = std::sqrt(exact.cov()(j, j) * (1.0 + maha2) /
                                        static_cast<double>(n_draws));
            REQUIRE(std::abs(mc_mean(j) - exact.mean()(j)) < 4.0 * se);
        }
        REQUIRE((mc_cov - exact.cov()).norm() < 0.02 * exact.cov().norm());
    }
}

TEST_CASE("sampling reproduces the distribution's moments") {
    VectorXd mean(2);
    mean << 2.0, -1.0;
    const MatrixXd cov = mat2(2.0, 0.8, 0.8, 1.0);
    const gaussian::GaussianDist dist(mean, cov);
    const Eigen::Index n = 200000;
    const MatrixXd draws = gaussian::sample(dist, 99, n);
    REQUIRE(draws.rows() == n);
    REQUIRE(draws.cols() == 2);

    const VectorXd avg = draws.colwise().mean().transpose();
    REQUIRE_THAT((avg - mean).norm(), Catch::Matchers::WithinAbs(0.0, 0.02));

    MatrixXd centered = draws;
    centered.rowwise() -= avg.transpose();
    const MatrixXd sample_cov = centered.transpose() * centered / static_cast<double>(n - 1);
    REQUIRE_THAT((sample_cov - cov).norm(), Catch::Matchers::WithinAbs(0.0, 0.05));
}

TEST_CASE("sampling is deterministic in the seed") {
    const gaussian::GaussianDist dist(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
    const MatrixXd a = gaussian::sample(dist, 42, 10);
    const MatrixXd b = gaussian::sample(dist, 42, 10);
    const MatrixXd c = gaussian::sample(dist, 43, 10);
    REQUIRE(a == b);
    REQUIRE(a != c);
}

TEST_CASE("sampling a zero-variance direction stays exactly at the mean") {
    VectorXd mean(2);
    mean << 3.0, 4.0;
    MatrixXd cov = MatrixXd::Zero(2, 2);
    cov(0, 0) = 1.0;
    const gaussian::GaussianDist dist(mean, cov);
    const MatrixXd draws = gaussian::sample(dist, 7, 100);
    for (Eigen::Index i = 0; i < draws.rows(); ++i)
        REQUIRE(draws(i, 1) == 4.0);
}
