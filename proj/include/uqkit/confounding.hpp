#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uqkit/errors.hpp"

namespace uqkit::confounding {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Pairwise correlations among a confounder w, an exposure x, and a response
// y. The three values must assemble into a valid correlation matrix (order
// w, x, y): every leading principal minor >= -1e-12.
class TriCorrelation {
public:
    TriCorrelation(double rho_xy, double rho_wy, double rho_xw)
        : rho_xy_(rho_xy), rho_wy_(rho_wy), rho_xw_(rho_xw) {
        for (double r : {rho_xy, rho_wy, rho_xw})
            if (!(r >= -1.0 && r <= 1.0))
                throw InputError("TriCorrelation: correlations must lie in [-1, 1]");
        const MatrixXd m = correlation_matrix();
        const double minor2 = 1.0 - rho_xw_ * rho_xw_;
        const double minor3 = m.determinant();
        if (minor2 < -1e-12 || minor3 < -1e-12)
            throw InputError("TriCorrelation: the three correlations do not form a "
                             "positive semi-definite correlation matrix");
    }

    double rho_xy() const { return rho_xy_; }
    double rho_wy() const { return rho_wy_; }
    double rho_xw() const { return rho_xw_; }

    // Order (w, x, y).
    MatrixXd correlation_matrix() const {
        MatrixXd m(3, 3);
        m << 1.0, rho_xw_, rho_wy_,
             rho_xw_, 1.0, rho_xy_,
             rho_wy_, rho_xy_, 1.0;
        return m;
    }

private:
    double rho_xy_;
    double rho_wy_;
    double rho_xw_;
};

// Correlation between x and y after conditioning on the confounder w:
//   (rho_xy - rho_wy rho_xw) / sqrt((1 - rho_xw^2)(1 - rho_wy^2)).
// Can differ in sign from the raw rho_xy. Degenerates when w is perfectly
// correlated with either variable.
inline double conditional_correlation(const TriCorrelation& c) {
    const double den_x = 1.0 - c.rho_xw() * c.rho_xw();
    const double den_y = 1.0 - c.rho_wy() * c.rho_wy();
    if (!(den_x > 0.0) || !(den_y > 0.0))
        throw NumericalError("conditional_correlation: the confounder is perfectly "
                             "correlated with x or y; the conditional correlation "
                             "is undefined");
    return (c.rho_xy() - c.rho_wy() * c.rho_xw()) / std::sqrt(den_x * den_y);
}

// Coefficients of the best linear predictor of y from (w, x) in standardized
// units, from the normal equations of the 2x2 system.
struct PartialRegression {
    double coef_w;
    double coef_x;
};

inline PartialRegression partial_regression(const TriCorrelation& c) {
    const double det = 1.0 - c.rho_xw() * c.rho_xw();
    if (!(det > 0.0))
        throw NumericalError("partial_regression: w and x are perfectly correlated; "
                             "the coefficients are not identified");
    const double coef_w = (c.rho_wy() - c.rho_xw() * c.rho_xy()) / det;
    const double coef_x = (c.rho_xy() - c.rho_xw() * c.rho_wy()) / det;
    return {coef_w, coef_x};
}

// Cross-classified counts with ordered rows and columns.
struct Table2D {
    std::vector<std::vector<long long>> counts;
};

namespace detail {

inline void validate_counts(const std::vector<std::vector<long long>>& counts,
                            const std::string& who) {
    if (counts.empty() || counts.front().empty())
        throw InputError(who + ": table must have at least one row and one column");
    const std::size_t cols = counts.front().size();
    long long total = 0;
    for (const auto& row : counts) {
        if (row.size() != cols)
            throw InputError(who + ": ragged rows");
        for (long long c : row) {
            if (c < 0)
                throw InputError(who + ": negative count");
            total += c;
        }
    }
    if (total == 0)
        throw InputError(who + ": table is empty");
}

} // namespace detail

// Ordinal association from concordant vs discordant pairs:
//   gamma = (C - D) / (C + D),
// where C counts pairs ordered the same way on both axes and D pairs ordered
// oppositely. Tied pairs drop out. All pairs tied is an error.
inline double goodman_kruskal_gamma(const Table2D& table) {
    detail::validate_counts(table.counts, "goodman_kruskal_gamma");
    const std::size_t r = table.counts.size();
    const std::size_t s = table.counts.front().size();
    long double concordant = 0.0, discordant = 0.0;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            const long double nij = static_cast<long double>(table.counts[i][j]);
            if (nij == 0.0) continue;
            long double below_right = 0.0, below_left = 0.0;
            for (std::size_t k = i + 1; k < r; ++k)
                for (std::size_t l = 0; l < s; ++l) {
                    if (l > j) below_right += static_cast<long double>(table.counts[k][l]);
                    if (l < j) below_left += static_cast<long double>(table.counts[k][l]);
                }
            concordant += nij * below_right;
            discordant += nij * below_left;
        }
    if (concordant + discordant == 0.0)
        throw InputError("goodman_kruskal_gamma: every pair is tied; the statistic "
                         "is undefined");
    return static_cast<double>((concordant - discordant) / (concordant + discordant));
}

// Counts cross-classified by a stratifier w on top of the (x, y) axes, with
// the bin edges that produced each axis.
class Table3D {
public:
    Table3D(std::vector<std::vector<std::vector<long long>>> counts,
            std::vector<double> edges_w, std::vector<double> edges_x,
            std::vector<double> edges_y)
        : counts_(std::move(counts)), edges_w_(std::move(edges_w)),
          edges_x_(std::move(edges_x)), edges_y_(std::move(edges_y)) {
        validate_edges(edges_w_, "w");
        validate_edges(edges_x_, "x");
        validate_edges(edges_y_, "y");
        if (counts_.size() != edges_w_.size() - 1)
            throw InputError("Table3D: w axis has " + std::to_string(counts_.size()) +
                             " slices but the edges define " +
                             std::to_string(edges_w_.size() - 1));
        long long total = 0;
        for (const auto& slice : counts_) {
            if (slice.size() != edges_x_.size() - 1)
                throw InputError("Table3D: x axis size mismatch");
            for (const auto& row : slice) {
                if (row.size() != edges_y_.size() - 1)
                    throw InputError("Table3D: y axis size mismatch");
                for (long long c : row) {
                    if (c < 0) throw InputError("Table3D: negative count");
                    total += c;
                }
            }
        }
        if (total == 0) throw InputError("Table3D: table is empty");
    }

    // Bins three parallel samples into pre-defined edges. Values outside the
    // edge range are rejected: the bins are part of the analysis design.
    static Table3D from_samples(std::span<const double> w, std::span<const double> x,
                                std::span<const double> y, std::vector<double> edges_w,
                                std::vector<double> edges_x, std::vector<double> edges_y) {
        if (w.size() != x.size() || w.size() != y.size())
            throw InputError("Table3D: samples differ in length");
        if (w.empty())
            throw InputError("Table3D: no samples");
        validate_edges(edges_w, "w");
        validate_edges(edges_x, "x");
        validate_edges(edges_y, "y");
        std::vector<std::vector<std::vector<long long>>> counts(
            edges_w.size() - 1,
            std::vector<std::vector<long long>>(edges_x.size() - 1,
                                                std::vector<long long>(edges_y.size() - 1, 0)));
        for (std::size_t i = 0; i < w.size(); ++i) {
            const std::size_t bw = bin_of(w[i], edges_w, "w");
            const std::size_t bx = bin_of(x[i], edges_x, "x");
            const std::size_t by = bin_of(y[i], edges_y, "y");
            ++counts[bw][bx][by];
        }
        return Table3D(std::move(counts), std::move(edges_w), std::move(edges_x),
                       std::move(edges_y));
    }

    std::size_t slices() const { return counts_.size(); }
    const std::vector<std::vector<std::vector<long long>>>& counts() const { return counts_; }
    const std::vector<double>& edges_w() const { return edges_w_; }
    const std::vector<double>& edges_x() const { return edges_x_; }
    const std::vector<double>& edges_y() const { return edges_y_; }

    Table2D slice(std::size_t w_index) const {
        if (w_index >= counts_.size())
            throw InputError("Table3D: slice index " + std::to_string(w_index) +
                             " out of range");
        return Table2D{counts_[w_index]};
    }

private:
    static void validate_edges(const std::vector<double>& edges, const std::string& axis) {
        if (edges.size() < 2)
            throw InputError("Table3D: axis " + axis + " needs at least two edges");
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (!(edges[i] > edges[i - 1]))
                throw InputError("Table3D: axis " + axis + " edges must be strictly increasing");
    }

    // Bins are [e_i, e_{i+1}), the last closed on the right.
    static std::size_t bin_of(double v, const std::vector<double>& edges,
                              const std::string& axis) {
        if (v < edges.front() || v > edges.back())
            throw InputError("Table3D: value " + std::to_string(v) +
                             " lies outside the " + axis + " bins");
        if (v == edges.back()) return edges.size() - 2;
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return static_cast<std::size_t>(it - edges.begin()) - 1;
    }

    std::vector<std::vector<std::vector<long long>>> counts_;
    std::vector<double> edges_w_;
    std::vector<double> edges_x_;
    std::vector<double> edges_y_;
};

// Collapses the stratifier by summing counts across its slices. Association
// measured after this step can reverse the sign seen inside every slice.
inline Table2D marginalize(const Table3D& t) {
    const auto& c = t.counts();
    std::vector<std::vector<long long>> out(c.front().size(),
                                            std::vector<long long>(c.front().front().size(), 0));
    for (const auto& slice : c)
        for (std::size_t i = 0; i < slice.size(); ++i)
            for (std::size_t j = 0; j < slice[i].size(); ++j)
                out[i][j] += slice[i][j];
    return Table2D{out};
}

struct MaupRow {
    int level;                          // cells per axis
    long long blocks;                   // non-empty cells
    std::optional<double> correlation;  // empty when a block-mean variance is zero
};

// Correlation between two point attributes after averaging them over the
// cells of coarser and coarser grids laid over the locations. The value can
// move, and even change sign, purely because the aggregation units changed.
// Each level splits the bounding box into level x level x ... cells;
// locations on the upper boundary fall into the last cell.
inline std::vector<MaupRow> maup_scan(const MatrixXd& locations, const VectorXd& x,
                                      const VectorXd& y, std::span<const int> levels) {
    const Eigen::Index n = locations.rows();
    if (n < 2)
        throw InputError("maup_scan: need at least two points");
    if (x.size() != n || y.size() != n)
        throw InputError("maup_scan: attribute lengths do not match the locations");
    if (levels.empty())
        throw InputError("maup_scan: no aggregation levels given");
    const Eigen::Index d = locations.cols();
    VectorXd lo = locations.colwise().minCoeff();
    VectorXd hi = locations.colwise().maxCoeff();

    std::vector<MaupRow> out;
    for (int level : levels) {
        if (level < 1)
            throw InputError("maup_scan: levels must be >= 1");
        std::map<std::vector<int>, std::pair<std::vector<double>, std::vector<double>>> blocks;
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<int> key(static_cast<std::size_t>(d));
            for (Eigen::Index k = 0; k < d; ++k) {
                const double extent = hi(k) - lo(k);
                int cell = 0;
                if (extent > 0.0) {
                    cell = static_cast<int>(std::floor((locations(i, k) - lo(k)) / extent *
                                                      static_cast<double>(level)));
                    cell = std::clamp(cell, 0, level - 1);
                }
                key[static_cast<std::size_t>(k)] = cell;
            }
            auto& [xs, ys] = blocks[key];
            xs.push_back(x(i));
            ys.push_back(y(i));
        }
        if (blocks.size() < 2)
            throw InputError("maup_scan: level " + std::to_string(level) +
                             " produces fewer than two occupied blocks");
        std::vector<double> bx, by;
        for (const auto& [key, data] : blocks) {
            const auto& [xs, ys] = data;
            double mx = 0.0, my = 0.0;
            for (double v : xs) mx += v;
            for (double v : ys) my += v;
            bx.push_back(mx / static_cast<double>(xs.size()));
            by.push_back(my / static_cast<double>(ys.size()));
        }
        const std::size_t m = bx.size();
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < m; ++i) { mx += bx[i]; my += by[i]; }
        mx /= static_cast<double>(m);
        my /= static_cast<double>(m);
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sxx += (bx[i] - mx) * (bx[i] - mx);
            syy += (by[i] - my) * (by[i] - my);
            sxy += (bx[i] - mx) * (by[i] - my);
        }
        MaupRow row{level, static_cast<long long>(m), std::nullopt};
        if (sxx > 0.0 && syy > 0.0)
            row.correlation = sxy / std::sqrt(sxx * syy);
        out.push_back(row);
    }
    return out;
}

} // namespace uqkit::confounding
