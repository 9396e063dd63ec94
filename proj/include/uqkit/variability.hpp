#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/errors.hpp"

namespace uqkit::variability {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Design matrix plus response for ordinary least squares, with the known
// measurement-error variance of the response recorded alongside.
class RegressionDataset {
public:
    RegressionDataset(MatrixXd design, VectorXd response, double meas_var)
        : design_(std::move(design)), response_(std::move(response)), meas_var_(meas_var) {
        const Eigen::Index n = design_.rows();
        const Eigen::Index p = design_.cols();
        if (p < 1)
            throw InputError("RegressionDataset: design matrix needs at least one column");
        if (n <= p)
            throw InputError("RegressionDataset: need more rows than columns, got " +
                             std::to_string(n) + " rows and " + std::to_string(p) + " columns");
        if (response_.size() != n)
            throw InputError("RegressionDataset: response has " + std::to_string(response_.size()) +
                             " entries but the design matrix has " + std::to_string(n) + " rows");
        if (!(meas_var_ >= 0.0) || !std::isfinite(meas_var_))
            throw InputError("RegressionDataset: measurement-error variance must be finite and >= 0");
        Eigen::JacobiSVD<MatrixXd> svd(design_);
        const double smax = svd.singularValues()(0);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        if (!(smin > 1e-10 * smax))
            throw InputError("RegressionDataset: design matrix is rank-deficient");
    }

    const MatrixXd& design() const { return design_; }
    const VectorXd& response() const { return response_; }
    double meas_var() const { return meas_var_; }
    Eigen::Index n() const { return design_.rows(); }
    Eigen::Index p() const { return design_.cols(); }

private:
    MatrixXd design_;
    VectorXd response_;
    double meas_var_;
};

inline VectorXd fit_ols(const RegressionDataset& ds) {
    return ds.design().householderQr().solve(ds.response());
}

// Residual-based variance estimate s^2 = RSS / (n - p).
inline double reml_variance(const RegressionDataset& ds) {
    const VectorXd beta = fit_ols(ds);
    const VectorXd resid = ds.response() - ds.design() * beta;
    return resid.squaredNorm() / static_cast<double>(ds.n() - ds.p());
}

// Split of the residual variance about a fitted mean into natural variability
// plus measurement-error variance. Constructed so that
// s_xi2 == s_delta2 + s_eps2 holds bitwise.
struct VarianceLedger {
    double s_xi2;     // total residual variance about the fitted mean
    double s_eps2;    // measurement-error variance (known)
    double s_delta2;  // natural variability
    bool conserved;   // true once the split has been validated
};

// Splits a total residual variance into natural + measurement parts. A total
// smaller than the measurement part violates the conservation identity.
inline VarianceLedger conserve(double s_xi2, double s_eps2) {
    if (!(s_xi2 >= 0.0) || !std::isfinite(s_xi2))
        throw InputError("conserve: total variance must be finite and >= 0");
    if (!(s_eps2 >= 0.0) || !std::isfinite(s_eps2))
        throw InputError("conserve: measurement-error variance must be finite and >= 0");
    const double s_delta2 = s_xi2 - s_eps2;
    if (s_delta2 < 0.0)
        throw InputError("conserve: total variance " + std::to_string(s_xi2) +
                         " is smaller than the measurement-error variance " +
                         std::to_string(s_eps2) +
                         "; no nonnegative natural variability exists");
    // Re-deriving the total from the parts makes the identity exact in
    // floating point, not just up to round-off.
    return {s_delta2 + s_eps2, s_eps2, s_delta2, true};
}

inline VarianceLedger conserve(const RegressionDataset& ds) {
    return conserve(reml_variance(ds), ds.meas_var());
}

// Additive split of a response into named large-scale components plus a
// small-scale variance. expected_value() is the sum of the components.
struct ScaleDecomposition {
    std::vector<std::pair<std::string, double>> large_scale;
    double small_scale_var = 0.0;

    double expected_value() const {
        double s = 0.0;
        for (const auto& [name, v] : large_scale) s += v;
        return s;
    }
};

// Fitted large-scale components at the covariate mean (coefficient times
// column average), with the natural variability as the small scale.
inline ScaleDecomposition decompose_scales(const RegressionDataset& ds) {
    const VectorXd beta = fit_ols(ds);
    const VarianceLedger ledger = conserve(ds);
    ScaleDecomposition out;
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
        const double col_mean = ds.design().col(j).mean();
        out.large_scale.emplace_back("term" + std::to_string(j), beta(j) * col_mean);
    }
    out.small_scale_var = ledger.s_delta2;
    return out;
}

// Simulation check of var(z) = var(y) + sigma_eps2 when z = y + eps with
// independent y ~ N(mean, sigma_delta2), eps ~ N(0, sigma_eps2). The
// tolerance is four standard errors of the difference of sample variances.
struct TotalVarianceCheck {
    double lhs;        // sample var(z)
    double rhs;        // sample var(y) + sigma_eps2
    double tolerance;  // 4 * SE
};

inline TotalVarianceCheck total_variance_check(double sigma_delta2, double sigma_eps2,
                                               double mean, int n_draws, std::uint64_t seed) {
    if (!(sigma_delta2 >= 0.0) || !(sigma_eps2 >= 0.0))
        throw InputError("total_variance_check: variances must be >= 0");
    if (n_draws < 2)
        throw InputError("total_variance_check: n_draws must be >= 2");
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd_delta = std::sqrt(sigma_delta2);
    const double sd_eps = std::sqrt(sigma_eps2);
    std::vector<double> y(static_cast<std::size_t>(n_draws));
    std::vector<double> z(static_cast<std::size_t>(n_draws));
    for (int i = 0; i < n_draws; ++i) {
        const double yi = mean + sd_delta * normal(engine);
        const double ei = sd_eps * normal(engine);
        y[static_cast<std::size_t>(i)] = yi;
        z[static_cast<std::size_t>(i)] = yi + ei;
    }
    auto sample_var = [](const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        double m = 0.0;
        for (double x : v) m += x;
        m /= n;
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return ss / (n - 1.0);
    };
    const double var_z = sample_var(z);
    const double var_y = sample_var(y);
    // SE of a normal sample variance is s^2 sqrt(2/(n-1)); the difference of
    // the two (dependent) estimates is bounded by the sum of the SEs.
    const double se = std::sqrt(2.0 / (static_cast<double>(n_draws) - 1.0)) * (var_z + var_y);
    return {var_z, var_y + sigma_eps2, 4.0 * se};
}

// Decomposition of total sum of squares into between-group + within-group
// parts; the identity between + within == total is exact up to round-off.
struct AnovaSums {
    double between;
    double within;
    double total;
};

inline AnovaSums anova_sums_of_squares(std::span<const double> values,
                                       std::span<const int> groups) {
    if (values.size() != groups.size())
        throw InputError("anova_sums_of_squares: values and groups differ in length");
    if (values.size() < 2)
        throw InputError("anova_sums_of_squares: need at least two values");
    std::map<int, std::pair<double, int>> acc;  // group -> (sum, count)
    double grand = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto& [sum, count] = acc[groups[i]];
        sum += values[i];
        ++count;
        grand += values[i];
    }
    grand /= static_cast<double>(values.size());
    double between = 0.0, within = 0.0, total = 0.0;
    for (const auto& [g, sc] : acc) {
        const double gm = sc.first / static_cast<double>(sc.second);
        between += static_cast<double>(sc.second) * (gm - grand) * (gm - grand);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double gm = acc[groups[i]].first / static_cast<double>(acc[groups[i]].second);
        within += (values[i] - gm) * (values[i] - gm);
        total += (values[i] - grand) * (values[i] - grand);
    }
    return {between, within, total};
}

// Point prediction at x_new and its mean squared error
//   mse = s_xi2 * x_new' (X'X)^-1 x_new + s_delta2,
// the estimation variance of the fitted mean plus the natural variability of
// a new draw about it.
struct PredictionMoments {
    double predicted;
    double mse;
};

inline PredictionMoments prediction_moments(const RegressionDataset& ds, const VectorXd& x_new,
                                            const VarianceLedger& ledger) {
    if (x_new.size() != ds.p())
        throw InputError("prediction_moments: x_new has dimension " +
                         std::to_string(x_new.size()) + " but the design has " +
                         std::to_string(ds.p()) + " columns");
    if (!ledger.conserved)
        throw InputError("prediction_moments: ledger has not been conserved");
    const VectorXd beta = fit_ols(ds);
    const MatrixXd xtx = ds.design().transpose() * ds.design();
    Eigen::LLT<MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success)
        throw NumericalError("prediction_moments: X'X is not positive definite");
    const double leverage = x_new.dot(llt.solve(x_new));
    return {beta.dot(x_new), ledger.s_xi2 * leverage + ledger.s_delta2};
}

// Empirical split of mean squared error about a target value into squared
// bias plus spread; bias_sq + variance == mse exactly (population moments,
// divisor n, expanded about the same mean).
struct BiasVariance {
    double bias_sq;
    double variance;
    double mse;
};

inline BiasVariance bias_variance(std::span<const double> estimates, double target) {
    if (estimates.size() < 2)
        throw InputError("bias_variance: need at least two replicate estimates");
    const double n = static_cast<double>(estimates.size());
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= n;
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= n;
    const double bias = mean - target;
    return {bias * bias, var, bias * bias + var};
}

// Variance of a sum of two correlated errors:
//   var1 + var2 + 2 rho sqrt(var1 var2).
inline double correlated_error_budget(double var1, double var2, double rho) {
    if (!(var1 >= 0.0) || !(var2 >= 0.0))
        throw InputError("correlated_error_budget: variances must be >= 0");
    if (!(rho >= -1.0 && rho <= 1.0))
        throw InputError("correlated_error_budget: correlation must lie in [-1, 1]");
    return var1 + var2 + 2.0 * rho * std::sqrt(var1 * var2);
}

// Power-family transform g_lambda(x) = (x^lambda - 1) / lambda, log x at
// lambda = 0. Continuous in lambda; requires x > 0.
inline double box_cox(double x, double lambda) {
    if (!(x > 0.0))
        throw InputError("box_cox: x must be positive, got " + std::to_string(x));
    if (lambda == 0.0) return std::log(x);
    return std::expm1(lambda * std::log(x)) / lambda;
}

namespace detail {

inline double mean_of(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        throw NumericalError("correlation: zero variance");
    return sab / std::sqrt(saa * sbb);
}

} // namespace detail

// Adjusted Fisher-Pearson skewness G1 = g1 sqrt(n(n-1))/(n-2); zero for
// (near-)constant samples.
inline double sample_skewness(std::span<const double> v) {
    if (v.size() < 3)
        throw InputError("sample_skewness: need at least three values");
    const double n = static_cast<double>(v.size());
    const double m = detail::mean_of(v);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    const double scale = std::max(1.0, std::abs(m));
    if (m2 <= 1e-28 * scale * scale) return 0.0;
    const double g1 = m3 / std::pow(m2, 1.5);
    return g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
}

// One transform candidate and its diagnostic scores, each in [0, 1], larger
// meaning better-behaved on the transformed scale.
struct AdditivityScore {
    double lambda;
    double linearity;         // R^2 of transformed z on x
    double homoskedasticity;  // 1 - |corr(|residual|, x)|
    double symmetry;          // 1 - |skewness|, clamped at 0
    double overall;           // weighted product of the three
};

// Scores each candidate lambda for how close the transformed response comes
// to an additive description: linear in x, even spread, symmetric residuals.
// Results are sorted best-first (ties broken by smaller lambda). lambda = 1
// is the identity shift z - 1 and needs no positivity; every other lambda
// requires z > 0.
inline std::vector<AdditivityScore> additivity_scan(std::span<const double> x,
                                                    std::span<const double> z,
                                                    std::span<const double> lambda_grid,
                                                    double w_linearity = 1.0,
                                                    double w_homoskedasticity = 1.0,
                                                    double w_symmetry = 1.0) {
    if (x.size() != z.size())
        throw InputError("additivity_scan: x and z differ in length");
    if (x.size() < 4)
        throw InputError("additivity_scan: need at least four observations");
    if (lambda_grid.empty())
        throw InputError("additivity_scan: lambda grid is empty");
    if (!(w_linearity >= 0.0 && w_homoskedasticity >= 0.0 && w_symmetry >= 0.0))
        throw InputError("additivity_scan: weights must be >= 0");
    const std::size_t n = x.size();
    {
        double sxx = 0.0;
        const double mx = detail::mean_of(x);
        for (double xi : x) sxx += (xi - mx) * (xi - mx);
        if (!(sxx > 0.0))
            throw InputError("additivity_scan: x is constant");
    }
    bool all_positive = true;
    for (double zi : z)
        if (!(zi > 0.0)) { all_positive = false; break; }

    std::vector<AdditivityScore> out;
    out.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        std::vector<double> t(n);
        if (lambda == 1.0) {
            for (std::size_t i = 0; i < n; ++i) t[i] = z[i] - 1.0;
        } else {
            if (!all_positive)
                throw InputError("additivity_scan: lambda " + std::to_string(lambda) +
                                 " requires a strictly positive response");
            for (std::size_t i = 0; i < n; ++i) t[i] = box_cox(z[i], lambda);
        }

        // Simple regression of t on x.
        const double mx = detail::mean_of(x);
        const double mt = detail::mean_of(t);
        double sxx = 0.0, sxt = 0.0, stt = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxt += (x[i] - mx) * (t[i] - mt);
            stt += (t[i] - mt) * (t[i] - mt);
        }
        AdditivityScore s{};
        s.lambda = lambda;
        if (!(stt > 0.0)) {
            // Transform collapsed the response; nothing linear to explain.
            s.linearity = 0.0;
            s.homoskedasticity = 1.0;
            s.symmetry = 1.0;
        } else {
            const double slope = sxt / sxx;
            const double intercept = mt - slope * mx;
            std::vector<double> resid(n), abs_resid(n);
            double rss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                resid[i] = t[i] - intercept - slope * x[i];
                abs_resid[i] = std::abs(resid[i]);
                rss += resid[i] * resid[i];
            }
            s.linearity = std::clamp(1.0 - rss / stt, 0.0, 1.0);
            double hcorr = 0.0;
            try {
                hcorr = detail::correlation(abs_resid, x);
            } catch (const NumericalError&) {
                hcorr = 0.0;  // constant |residuals|: no trend in spread
            }
            s.homoskedasticity = std::clamp(1.0 - std::abs(hcorr), 0.0, 1.0);
            s.symmetry = std::clamp(1.0 - std::abs(sample_skewness(resid)), 0.0, 1.0);
        }
        s.overall = std::pow(s.linearity, w_linearity) *
                    std::pow(s.homoskedasticity, w_homoskedasticity) *
                    std::pow(s.symmetry, w_symmetry);
        out.push_back(s);
    }
    std::stable_sort(out.begin(), out.end(), [](const AdditivityScore& a, const AdditivityScore& b) {
        if (a.overall != b.overall) return a.overall > b.overall;
        return a.lambda < b.lambda;
    });
    return out;
}

} // namespace uqkit::variability
