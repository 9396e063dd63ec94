#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "uqkit/confounding.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace uqkit;

TEST_CASE("tri-correlation validation") {
    REQUIRE_NOTHROW(confounding::TriCorrelation(0.3, 0.7, 0.7));
    REQUIRE_THROWS_AS(confounding::TriCorrelation(1.5, 0.0, 0.0), InputError);
    // Individually legal but jointly impossible: determinant far below zero.
    REQUIRE_THROWS_AS(confounding::TriCorrelation(-0.9, 0.9, 0.9), InputError);
    const confounding::TriCorrelation c(0.5, 0.8, 0.6);
    REQUIRE(c.correlation_matrix()(0, 1) == 0.6);
    REQUIRE(c.correlation_matrix()(0, 2) == 0.8);
    REQUIRE(c.correlation_matrix()(1, 2) == 0.5);
}

TEST_CASE("conditional correlation worked examples") {
    // (0.5 - 0.8 * 0.6) / sqrt((1 - 0.36)(1 - 0.64)) = 0.02 / 0.48.
    const confounding::TriCorrelation a(0.5, 0.8, 0.6);
    REQUIRE_THAT(confounding::conditional_correlation(a),
                 Catch::Matchers::WithinAbs(0.02 / 0.48, 1e-14));
    // A positive raw correlation that turns negative once w is held fixed.
    const confounding::TriCorrelation b(0.3, 0.7, 0.7);
    REQUIRE_THAT(confounding::conditional_correlation(b),
                 Catch::Matchers::WithinAbs(-0.37254901960784315, 1e-12));
    REQUIRE(b.rho_xy() > 0.0);
    REQUIRE(confounding::conditional_correlation(b) < 0.0);
}

TEST_CASE("conditional correlation matches the Schur-complement reduction") {
    std::mt19937_64 engine(246810);
    for (int rep = 0; rep < 200; ++rep) {
        const MatrixXd m = oracles::random_correlation(engine, 3);
        const confounding::TriCorrelation c(m(1, 2), m(0, 2), m(0, 1));
        // Condition (x, y) on w by the block reduction of the full matrix.
        const MatrixXd s =
            m.block(1, 1, 2, 2) - m.block(1, 0, 2, 1) * m.block(0, 1, 1, 2);
        const double oracle = s(0, 1) / std::sqrt(s(0, 0) * s(1, 1));
        const double cond = confounding::conditional_correlation(c);
        REQUIRE_THAT(cond, Catch::Matchers::WithinAbs(oracle, 1e-12));
        REQUIRE(std::abs(cond) <= 1.0 + 1e-12);
    }
}

TEST_CASE("conditional correlation degenerates at perfect confounding") {
    const confounding::TriCorrelation c(1.0, 1.0, 1.0);
    REQUIRE_THROWS_AS(confounding::conditional_correlation(c), NumericalError);
    REQUIRE_THROWS_AS(confounding::partial_regression(c), NumericalError);
}

TEST_CASE("partial regression coefficients") {
    const confounding::TriCorrelation c(0.5, 0.8, 0.6);
    const confounding::PartialRegression pr = confounding::partial_regression(c);
    REQUIRE_THAT(pr.coef_w, Catch::Matchers::WithinAbs(0.78125, 1e-12));
    REQUIRE_THAT(pr.coef_x, Catch::Matchers::WithinAbs(0.03125, 1e-12));
    // The coefficients solve the normal equations.
    REQUIRE_THAT(pr.coef_w + c.rho_xw() * pr.coef_x,
                 Catch::Matchers::WithinAbs(c.rho_wy(), 1e-12));
    REQUIRE_THAT(c.rho_xw() * pr.coef_w + pr.coef_x,
                 Catch::Matchers::WithinAbs(c.rho_xy(), 1e-12));
}

TEST_CASE("ordinal association statistic on small tables") {
    using confounding::Table2D;
    REQUIRE(confounding::goodman_kruskal_gamma(Table2D{{{5, 0}, {0, 5}}}) == 1.0);
    REQUIRE(confounding::goodman_kruskal_gamma(Table2D{{{0, 5}, {5, 0}}}) == -1.0);
    REQUIRE_THAT(confounding::goodman_kruskal_gamma(Table2D{{{30, 10}, {10, 30}}}),
                 Catch::Matchers::WithinAbs(0.8, 1e-14));
    REQUIRE_THROWS_AS(confounding::goodman_kruskal_gamma(Table2D{{{3}, {4}}}), InputError);
    REQUIRE_THROWS_AS(confounding::goodman_kruskal_gamma(Table2D{{}}), InputError);
    REQUIRE_THROWS_AS(confounding::goodman_kruskal_gamma(Table2D{{{1, 2}, {3}}}), InputError);
    REQUIRE_THROWS_AS(confounding::goodman_kruskal_gamma(Table2D{{{1, -2}}}), InputError);
    REQUIRE_THROWS_AS(confounding::goodman_kruskal_gamma(Table2D{{{0, 0}, {0, 0}}}),
                      InputError);
}

TEST_CASE("ordinal association matches exhaustive pair counting") {
    std::mt19937_64 engine(1123581321);
    std::uniform_int_distribution<long long> cnt(0, 12);
    std::uniform_int_distribution<int> dim(2, 4);
    for (int rep = 0; rep < 50; ++rep) {
        const int r = dim(engine), s = dim(engine);
        confounding::Table2D t;
        t.counts.assign(static_cast<std::size_t>(r),
                        std::vector<long long>(static_cast<std::size_t>(s), 0));
        long long c_total = 0;
        for (auto& row : t.counts)
            for (auto& c : row) { c = cnt(engine); c_total += c; }
        if (c_total == 0) t.counts[0][0] = 1;
        double fast;
        try {
            fast = confounding::goodman_kruskal_gamma(t);
        } catch (const InputError&) {
            continue;  // all pairs tied; nothing to compare
        }
        REQUIRE_THAT(fast,
                     Catch::Matchers::WithinAbs(oracles::gamma_by_pair_counting(t), 1e-12));
    }
}

TEST_CASE("ordinal association survives transposing with both orders reversed") {
    // Swapping the two classification axes and reversing both orderings maps
    // concordant pairs to concordant pairs, so the statistic is unchanged.
    // Monotone relabeling of the bins never touches the count table at all.
    std::mt19937_64 engine(8675309);
    std::uniform_int_distribution<long long> cnt(0, 9);
    std::uniform_int_distribution<int> dim(2, 5);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t r = static_cast<std::size_t>(dim(engine));
        const std::size_t s = static_cast<std::size_t>(dim(engine));
        confounding::Table2D t;
        t.counts.assign(r, std::vector<long long>(s, 0));
        for (auto& row : t.counts)
            for (auto& c : row) c = cnt(engine);
        t.counts[0][0] += 1;
        double g;
        try {
            g = confounding::goodman_kruskal_gamma(t);
        } catch (const InputError&) {
            continue;  // every pair tied
        }
        confounding::Table2D flipped;
        flipped.counts.assign(s, std::vector<long long>(r, 0));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < s; ++j)
                flipped.counts[s - 1 - j][r - 1 - i] = t.counts[i][j];
        REQUIRE(confounding::goodman_kruskal_gamma(flipped) == g);
    }
}

TEST_CASE("marginalizing preserves the total count") {
    std::mt19937_64 engine(5551212);
    std::uniform_int_distribution<long long> cnt(0, 9);
    std::uniform_int_distribution<int> dim(1, 4);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t nw = static_cast<std::size_t>(dim(engine));
        const std::size_t nx = static_cast<std::size_t>(dim(engine));
        const std::size_t ny = static_cast<std::size_t>(dim(engine));
        std::vector<std::vector<std::vector<long long>>> counts(
            nw, std::vector<std::vector<long long>>(nx, std::vector<long long>(ny, 0)));
        long long total = 0;
        for (auto& slice : counts)
            for (auto& row : slice)
                for (auto& c : row) {
                    c = cnt(engine);
                    total += c;
                }
        if (total == 0) {
            counts[0][0][0] = 1;
            total = 1;
        }
        auto edges = [](std::size_t n) {
            std::vector<double> e(n + 1);
            for (std::size_t i = 0; i <= n; ++i) e[i] = static_cast<double>(i);
            return e;
        };
        const confounding::Table3D t(counts, edges(nw), edges(nx), edges(ny));
        const confounding::Table2D m = confounding::marginalize(t);
        long long after = 0;
        for (const auto& row : m.counts)
            for (long long c : row) after += c;
        REQUIRE(after == total);
    }
}

TEST_CASE("three-way table binning, slicing, and marginalizing") {
    const std::vector<double> w{0.0, 0.0, 1.5, 1.5, 2.0};
    const std::vector<double> x{0.1, 0.9, 0.1, 0.9, 0.9};
    const std::vector<double> y{0.2, 0.2, 0.8, 0.8, 1.0};
    const confounding::Table3D t = confounding::Table3D::from_samples(
        w, x, y, {0.0, 1.0, 2.0}, {0.0, 0.5, 1.0}, {0.0, 0.5, 1.0});
    REQUIRE(t.slices() == 2);
    // w = 2.0 sits on the closing edge and lands in the last slice.
    REQUIRE(t.counts()[0][0][0] == 1);
    REQUIRE(t.counts()[0][1][0] == 1);
    REQUIRE(t.counts()[1][0][1] == 1);
    REQUIRE(t.counts()[1][1][1] == 2);
    const confounding::Table2D m = confounding::marginalize(t);
    REQUIRE(m.counts[0][0] == 1);
    REQUIRE(m.counts[1][1] == 2);
    REQUIRE(t.slice(1).counts[1][1] == 2);
    REQUIRE_THROWS_AS(t.slice(2), InputError);
    REQUIRE_THROWS_AS(confounding::Table3D::from_samples(w, x, y, {0.0, 1.0}, {0.0, 1.0},
                                                         {0.0, 1.0}),
                      InputError);  // w = 1.5 outside the bins
    REQUIRE_THROWS_AS(confounding::Table3D::from_samples(w, x, y, {0.0, 2.0},
                                                         {1.0, 0.0}, {0.0, 1.0}),
                      InputError);  // decreasing edges
}

TEST_CASE("aggregation reverses a within-slice association") {
    // Within both strata the association runs negative; pooled it runs
    // positive. Both directions are confirmed by exhaustive pair counting.
    const confounding::Table3D t(
        {{{6, 81}, {36, 234}}, {{71, 192}, {25, 55}}},
        {0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}, {0.0, 1.0, 2.0});
    const double g0 = confounding::goodman_kruskal_gamma(t.slice(0));
    const double g1 = confounding::goodman_kruskal_gamma(t.slice(1));
    const confounding::Table2D pooled = confounding::marginalize(t);
    const double gm = confounding::goodman_kruskal_gamma(pooled);
    REQUIRE(g0 < 0.0);
    REQUIRE(g1 < 0.0);
    REQUIRE(gm > 0.0);
    REQUIRE_THAT(g0, Catch::Matchers::WithinAbs(
                         oracles::gamma_by_pair_counting(t.slice(0)), 1e-12));
    REQUIRE_THAT(g1, Catch::Matchers::WithinAbs(
                         oracles::gamma_by_pair_counting(t.slice(1)), 1e-12));
    REQUIRE_THAT(gm, Catch::Matchers::WithinAbs(oracles::gamma_by_pair_counting(pooled), 1e-12));
    REQUIRE(pooled.counts[0][0] == 77);
    REQUIRE(pooled.counts[1][1] == 289);
}

TEST_CASE("aggregation level flips the sign of a point correlation") {
    // Four clusters along the diagonal. Within each cluster the attributes
    // move against each other harder than the cluster trend moves them
    // together, so points correlate negatively while cluster means correlate
    // perfectly positively.
    const int k_max = 4;
    MatrixXd loc(2 * k_max, 2);
    VectorXd x(2 * k_max), y(2 * k_max);
    for (int k = 0; k < k_max; ++k) {
        loc(2 * k, 0) = k - 0.05;
        loc(2 * k, 1) = k;
        loc(2 * k + 1, 0) = k + 0.05;
        loc(2 * k + 1, 1) = k;
        x(2 * k) = k - 1.2;
        x(2 * k + 1) = k + 1.2;
        y(2 * k) = k + 1.2;
        y(2 * k + 1) = k - 1.2;
    }
    const std::vector<int> levels{4, 256};
    const auto scan = confounding::maup_scan(loc, x, y, levels);
    REQUIRE(scan.size() == 2);
    REQUIRE(scan[0].level == 4);
    REQUIRE(scan[0].blocks == 4);
    REQUIRE(scan[0].correlation.has_value());
    REQUIRE(*scan[0].correlation > 0.99);
    REQUIRE(scan[1].blocks == 2 * k_max);
    REQUIRE(scan[1].correlation.has_value());
    REQUIRE(*scan[1].correlation < 0.0);
}

TEST_CASE("aggregation scan edge cases") {
    MatrixXd loc(4, 1);
    loc << 0.0, 1.0, 2.0, 3.0;
    VectorXd x(4), y(4);
    x << 1.0, 2.0, 3.0, 4.0;
    y << 4.0, 3.0, 2.0, 1.0;
    // One cell holds everything: no variation between blocks to correlate.
    REQUIRE_THROWS_AS(confounding::maup_scan(loc, x, y, std::vector<int>{1}), InputError);
    REQUIRE_THROWS_AS(confounding::maup_scan(loc, x, y, std::vector<int>{}), InputError);
    REQUIRE_THROWS_AS(confounding::maup_scan(loc, x, y, std::vector<int>{0}), InputError);
    REQUIRE_THROWS_AS(confounding::maup_scan(loc, VectorXd::Zero(3), y, std::vector<int>{2}),
                      InputError);
    // A constant attribute has no variance at any level.
    const VectorXd flat = VectorXd::Constant(4, 5.0);
    const auto scan = confounding::maup_scan(loc, flat, y, std::vector<int>{4});
    REQUIRE(scan[0].blocks == 4);
    REQUIRE_FALSE(scan[0].correlation.has_value());
}
