#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/errors.hpp"
#include "uqkit/gaussian.hpp"

namespace uqkit::spatial {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Locations are compared coordinate-wise at this absolute tolerance.
inline constexpr double kLocationTol = 1e-12;

enum class CovarianceFamily { exponential };

// Stationary isotropic covariance of distance. The exponential family is
// sill * exp(-h / scale); scale = 0 degenerates to pure nugget behaviour:
// full sill at distance zero, zero covariance at any positive distance.
class CovarianceFunction {
public:
    CovarianceFunction(CovarianceFamily family, double sill, double scale)
        : family_(family), sill_(sill), scale_(scale) {
        if (!(sill_ > 0.0) || !std::isfinite(sill_))
            throw InputError("CovarianceFunction: sill must be finite and > 0");
        if (!(scale_ >= 0.0) || !std::isfinite(scale_))
            throw InputError("CovarianceFunction: scale must be finite and >= 0");
    }

    double operator()(double distance) const {
        if (!(distance >= 0.0))
            throw InputError("CovarianceFunction: distance must be >= 0");
        if (distance == 0.0) return sill_;
        if (scale_ == 0.0) return 0.0;
        return sill_ * std::exp(-distance / scale_);
    }

    CovarianceFamily family() const { return family_; }
    double sill() const { return sill_; }
    double scale() const { return scale_; }

private:
    CovarianceFamily family_;
    double sill_;
    double scale_;
};

namespace detail {

inline bool same_location(const MatrixXd& a, Eigen::Index i, const MatrixXd& b, Eigen::Index j) {
    for (Eigen::Index k = 0; k < a.cols(); ++k)
        if (std::abs(a(i, k) - b(j, k)) > kLocationTol) return false;
    return true;
}

inline double distance(const MatrixXd& a, Eigen::Index i, const MatrixXd& b, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double d = a(i, k) - b(j, k);
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace detail

// Point-referenced data: locations (one per row), values, the known
// measurement-error variance, and optional per-row support labels recording
// the footprint each value refers to.
class SpatialDataset {
public:
    SpatialDataset(MatrixXd locations, VectorXd values, double meas_var,
                   std::vector<std::string> supports = {})
        : locations_(std::move(locations)), values_(std::move(values)),
          meas_var_(meas_var), supports_(std::move(supports)) {
        const Eigen::Index n = locations_.rows();
        if (n < 1)
            throw InputError("SpatialDataset: need at least one location");
        if (locations_.cols() < 1)
            throw InputError("SpatialDataset: locations need at least one coordinate");
        if (values_.size() != n)
            throw InputError("SpatialDataset: " + std::to_string(values_.size()) +
                             " values for " + std::to_string(n) + " locations");
        if (!(meas_var_ >= 0.0) || !std::isfinite(meas_var_))
            throw InputError("SpatialDataset: measurement-error variance must be finite and >= 0");
        if (!supports_.empty() && static_cast<Eigen::Index>(supports_.size()) != n)
            throw InputError("SpatialDataset: support labels must be empty or one per row");
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (detail::same_location(locations_, i, locations_, j))
                    throw InputError("SpatialDataset: rows " + std::to_string(i) + " and " +
                                     std::to_string(j) + " share a location");
    }

    const MatrixXd& locations() const { return locations_; }
    const VectorXd& values() const { return values_; }
    double meas_var() const { return meas_var_; }
    const std::vector<std::string>& supports() const { return supports_; }
    Eigen::Index n() const { return locations_.rows(); }
    Eigen::Index dim() const { return locations_.cols(); }

private:
    MatrixXd locations_;
    VectorXd values_;
    double meas_var_;
    std::vector<std::string> supports_;
};

// Covariance matrix of the latent field at the given locations. Duplicate
// locations are rejected: they would carry the full sill twice and make the
// matrix singular.
inline gaussian::SpdMatrix covariance_matrix(const MatrixXd& locations,
                                             const CovarianceFunction& cf) {
    const Eigen::Index n = locations.rows();
    if (n < 1)
        throw InputError("covariance_matrix: need at least one location");
    MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        c(i, i) = cf(0.0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (detail::same_location(locations, i, locations, j))
                throw InputError("covariance_matrix: rows " + std::to_string(i) + " and " +
                                 std::to_string(j) + " share a location");
            c(i, j) = c(j, i) = cf(detail::distance(locations, i, locations, j));
        }
    }
    return gaussian::SpdMatrix(std::move(c));
}

enum class TargetKind { process, observable };
enum class TrendModel { constant, linear, quadratic };

// Polynomial mean surface. Coefficients, when known, are used as-is;
// otherwise they are fitted by least squares from the data.
struct TrendSpec {
    TrendModel model = TrendModel::constant;
    std::optional<VectorXd> known_coefficients;
    std::string label() const {
        switch (model) {
            case TrendModel::constant: return "constant";
            case TrendModel::linear: return "linear";
            case TrendModel::quadratic: return "quadratic";
        }
        return "unknown";
    }
};

namespace detail {

inline Eigen::Index trend_columns(TrendModel model, Eigen::Index dim) {
    switch (model) {
        case TrendModel::constant: return 1;
        case TrendModel::linear: return 1 + dim;
        case TrendModel::quadratic: return 1 + 2 * dim;
    }
    throw InputError("trend_columns: unknown trend model");
}

inline MatrixXd trend_design(const MatrixXd& locations, TrendModel model) {
    const Eigen::Index n = locations.rows();
    const Eigen::Index d = locations.cols();
    MatrixXd x(n, trend_columns(model, d));
    x.col(0).setOnes();
    if (model == TrendModel::linear || model == TrendModel::quadratic)
        x.block(0, 1, n, d) = locations;
    if (model == TrendModel::quadratic)
        x.block(0, 1 + d, n, d) = locations.array().square().matrix();
    return x;
}

inline VectorXd trend_coefficients(const SpatialDataset& ds, const TrendSpec& trend) {
    const Eigen::Index cols = trend_columns(trend.model, ds.dim());
    if (trend.known_coefficients) {
        if (trend.known_coefficients->size() != cols)
            throw InputError("trend coefficients have dimension " +
                             std::to_string(trend.known_coefficients->size()) +
                             " but the trend model needs " + std::to_string(cols));
        return *trend.known_coefficients;
    }
    const MatrixXd x = trend_design(ds.locations(), trend.model);
    if (ds.n() < cols)
        throw InputError("trend fit needs at least " + std::to_string(cols) +
                         " data points, got " + std::to_string(ds.n()));
    Eigen::JacobiSVD<MatrixXd> svd(x);
    if (!(svd.singularValues()(svd.singularValues().size() - 1) >
          1e-10 * svd.singularValues()(0)))
        throw InputError("trend design matrix is rank-deficient at the data locations");
    return x.householderQr().solve(ds.values());
}

} // namespace detail

// Normal quantile function (Acklam's rational approximation plus one Halley
// refinement step); p must lie strictly inside (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InputError("normal_quantile: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact CDF.
    constexpr double sqrt_two_pi = 2.506628274631000502;
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * sqrt_two_pi * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

inline const std::vector<double>& percentile_levels() {
    static const std::vector<double> levels{2.5, 25.0, 50.0, 75.0, 97.5};
    return levels;
}

struct PercentileBands {
    std::vector<double> levels;  // percent
    MatrixXd values;             // one row per target, one column per level
};

struct KrigingResult {
    TargetKind target_kind;
    VectorXd means;
    VectorXd variances;
    VectorXd trend_coefficients;
    std::optional<PercentileBands> bands;
};

// Kriging prediction at `targets` with a plug-in polynomial trend.
//
// target_kind = process predicts the latent field y(s0): variance
// sill - c0' Sigma_z^-1 c0 with Sigma_z the data covariance plus
// measurement-error variance on the diagonal. target_kind = observable
// predicts a new measurement z(s0): the same mean, with the
// measurement-error variance added at targets away from the data; at a data
// location the datum itself is returned with zero variance.
//
// Trend-estimation uncertainty is not propagated: coefficients are plugged
// in, whether known or fitted.
inline KrigingResult krige(const SpatialDataset& ds, const CovarianceFunction& cf,
                           const TrendSpec& trend, const MatrixXd& targets,
                           TargetKind kind, bool with_bands = false) {
    if (targets.rows() < 1)
        throw InputError("krige: need at least one target");
    if (targets.cols() != ds.dim())
        throw InputError("krige: targets have dimension " + std::to_string(targets.cols()) +
                         " but the data have dimension " + std::to_string(ds.dim()));
    const VectorXd beta = detail::trend_coefficients(ds, trend);
    const MatrixXd data_design = detail::trend_design(ds.locations(), trend.model);
    const VectorXd resid = ds.values() - data_design * beta;

    MatrixXd sigma_z = covariance_matrix(ds.locations(), cf).matrix();
    sigma_z.diagonal().array() += ds.meas_var();
    Eigen::LLT<MatrixXd> llt(sigma_z);
    if (llt.info() != Eigen::Success)
        throw NumericalError("krige: data covariance is not positive definite");
    const VectorXd weights = llt.solve(resid);

    const Eigen::Index m = targets.rows();
    const MatrixXd target_design = detail::trend_design(targets, trend.model);
    VectorXd means(m), variances(m);
    for (Eigen::Index t = 0; t < m; ++t) {
        Eigen::Index at_data = -1;
        for (Eigen::Index i = 0; i < ds.n(); ++i)
            if (detail::same_location(targets, t, ds.locations(), i)) { at_data = i; break; }
        if (kind == TargetKind::observable && at_data >= 0) {
            means(t) = ds.values()(at_data);
            variances(t) = 0.0;
            continue;
        }
        VectorXd c0(ds.n());
        for (Eigen::Index i = 0; i < ds.n(); ++i)
            c0(i) = cf(detail::distance(targets, t, ds.locations(), i));
        means(t) = target_design.row(t).dot(beta) + c0.dot(weights);
        double v = cf.sill() - c0.dot(llt.solve(c0));
        if (kind == TargetKind::observable) v += ds.meas_var();
        if (v < 0.0) {
            if (v < -gaussian::kVarianceClampTol)
                throw NumericalError("krige: prediction variance " + std::to_string(v) +
                                     " is negative beyond the clamp tolerance");
            v = 0.0;
        }
        variances(t) = v;
    }

    KrigingResult out{kind, std::move(means), std::move(variances), beta, std::nullopt};
    if (with_bands) {
        const auto& levels = percentile_levels();
        MatrixXd vals(m, static_cast<Eigen::Index>(levels.size()));
        for (Eigen::Index t = 0; t < m; ++t) {
            const double sd = std::sqrt(out.variances(t));
            for (std::size_t l = 0; l < levels.size(); ++l)
                vals(t, static_cast<Eigen::Index>(l)) =
                    out.means(t) + normal_quantile(levels[l] / 100.0) * sd;
        }
        out.bands = PercentileBands{levels, std::move(vals)};
    }
    return out;
}

// Variance of the sample mean of equally-weighted observations of a field
// with covariance `cf` at the given locations:
//   var(zbar) = (1/n) * (sill + 2 * sum_{i<j} C(d_ij) / n).
inline double mean_variance(const MatrixXd& locations, const CovarianceFunction& cf) {
    const Eigen::Index n = locations.rows();
    if (n < 1)
        throw InputError("mean_variance: need at least one location");
    double cross = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            cross += cf(detail::distance(locations, i, locations, j));
    const double nn = static_cast<double>(n);
    return (cf.sill() + 2.0 * cross / nn) / nn;
}

// Number of independent observations carrying the same information as the
// correlated sample mean: sill / var(zbar). Equals n when the covariance
// vanishes between every pair; smaller under positive correlation.
inline double effective_sample_size(const MatrixXd& locations, const CovarianceFunction& cf) {
    return cf.sill() / mean_variance(locations, cf);
}

struct LagBin {
    double lag;
    double covariance;
    long long pairs;
};

struct DecompositionEntry {
    std::string trend_label;
    double regional_var;   // variance of the fitted surface at the data (divisor n)
    double residual_var;   // variance of the residuals (divisor n)
    double total;          // regional_var + residual_var
    std::vector<LagBin> residual_covariance;  // lag 0 first, then distance bins
};

// Fits each candidate trend and splits the data variance into the fitted
// surface's share plus the residual share, with a method-of-moments
// estimate of the residual covariance in `n_bins` equal-width distance bins.
// The split moves between the two shares as the trend changes while their
// total stays put; comparing totals across entries is the caller's check.
// `family` names the covariance family the binned estimate is read against;
// only the exponential family is available.
inline std::vector<DecompositionEntry> decomposition_audit(
    const SpatialDataset& ds, const std::vector<TrendSpec>& trends,
    CovarianceFamily family = CovarianceFamily::exponential, int n_bins = 15) {
    if (family != CovarianceFamily::exponential)
        throw InputError("decomposition_audit: unknown covariance family");
    if (trends.empty())
        throw InputError("decomposition_audit: need at least one trend");
    if (n_bins < 1)
        throw InputError("decomposition_audit: n_bins must be >= 1");
    if (ds.n() < 2)
        throw InputError("decomposition_audit: need at least two data points");
    const Eigen::Index n = ds.n();
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            dmax = std::max(dmax, detail::distance(ds.locations(), i, ds.locations(), j));
    if (!(dmax > 0.0))
        throw InputError("decomposition_audit: all pairwise distances are zero");

    std::vector<DecompositionEntry> out;
    for (const TrendSpec& trend : trends) {
        const VectorXd beta = detail::trend_coefficients(ds, trend);
        const MatrixXd x = detail::trend_design(ds.locations(), trend.model);
        const VectorXd fitted = x * beta;
        const VectorXd resid = ds.values() - fitted;
        const double fit_mean = fitted.mean();
        const double res_mean = resid.mean();
        const double nn = static_cast<double>(n);
        const double regional = (fitted.array() - fit_mean).square().sum() / nn;
        const double residual = (resid.array() - res_mean).square().sum() / nn;

        std::vector<double> cov_sum(static_cast<std::size_t>(n_bins), 0.0);
        std::vector<long long> cov_cnt(static_cast<std::size_t>(n_bins), 0);
        const double width = dmax / static_cast<double>(n_bins);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double dist = detail::distance(ds.locations(), i, ds.locations(), j);
                int bin = static_cast<int>(dist / width);
                if (bin >= n_bins) bin = n_bins - 1;
                cov_sum[static_cast<std::size_t>(bin)] +=
                    (resid(i) - res_mean) * (resid(j) - res_mean);
                ++cov_cnt[static_cast<std::size_t>(bin)];
            }
        std::vector<LagBin> bins;
        bins.push_back({0.0, residual, static_cast<long long>(n)});
        for (int b = 0; b < n_bins; ++b) {
            const double center = width * (static_cast<double>(b) + 0.5);
            const long long cnt = cov_cnt[static_cast<std::size_t>(b)];
            bins.push_back({center, cnt > 0 ? cov_sum[static_cast<std::size_t>(b)] /
                                                  static_cast<double>(cnt)
                                            : 0.0,
                            cnt});
        }
        out.push_back({trend.label(), regional, residual, regional + residual, std::move(bins)});
    }
    return out;
}

// A block represented by the centers of equal-measure cells covering it.
class BlockRegion {
public:
    BlockRegion(MatrixXd cell_centers, double cell_measure)
        : cells_(std::move(cell_centers)), cell_measure_(cell_measure) {
        if (cells_.rows() < 1)
            throw InputError("BlockRegion: need at least one cell");
        if (!(cell_measure_ > 0.0) || !std::isfinite(cell_measure_))
            throw InputError("BlockRegion: cell measure must be finite and > 0");
    }

    // Axis-aligned box [lower, upper] split into counts[k] cells per axis.
    static BlockRegion regular_grid(const VectorXd& lower, const VectorXd& upper,
                                    const std::vector<int>& counts) {
        const Eigen::Index d = lower.size();
        if (upper.size() != d || static_cast<Eigen::Index>(counts.size()) != d)
            throw InputError("BlockRegion: lower, upper and counts must agree in dimension");
        if (d < 1)
            throw InputError("BlockRegion: dimension must be >= 1");
        Eigen::Index total = 1;
        VectorXd width(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            if (counts[static_cast<std::size_t>(k)] < 1)
                throw InputError("BlockRegion: cell counts must be >= 1");
            if (!(upper(k) > lower(k)))
                throw InputError("BlockRegion: upper must exceed lower on every axis");
            width(k) = (upper(k) - lower(k)) / counts[static_cast<std::size_t>(k)];
            total *= counts[static_cast<std::size_t>(k)];
        }
        MatrixXd centers(total, d);
        std::vector<int> idx(static_cast<std::size_t>(d), 0);
        for (Eigen::Index row = 0; row < total; ++row) {
            for (Eigen::Index k = 0; k < d; ++k)
                centers(row, k) = lower(k) + width(k) * (idx[static_cast<std::size_t>(k)] + 0.5);
            for (Eigen::Index k = d - 1; k >= 0; --k) {
                if (++idx[static_cast<std::size_t>(k)] < counts[static_cast<std::size_t>(k)]) break;
                idx[static_cast<std::size_t>(k)] = 0;
            }
        }
        double measure = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) measure *= width(k);
        return BlockRegion(std::move(centers), measure);
    }

    const MatrixXd& cell_centers() const { return cells_; }
    double cell_measure() const { return cell_measure_; }
    Eigen::Index cell_count() const { return cells_.rows(); }

private:
    MatrixXd cells_;
    double cell_measure_;
};

// Variance of the block average of y(s) = y0 + delta(s), with var(y0) =
// sigma0_sq and delta a zero-mean field with covariance `cf`:
//   var(y(B)) = sigma0_sq + (1/m^2) sum_ij C(s_i - s_j)
// over the m cell centers. Growing the block shrinks the second term toward
// zero, never below sigma0_sq.
inline double block_average_variance(const CovarianceFunction& cf, double sigma0_sq,
                                     const BlockRegion& region) {
    if (!(sigma0_sq >= 0.0))
        throw InputError("block_average_variance: sigma0_sq must be >= 0");
    const Eigen::Index m = region.cell_count();
    const MatrixXd& cells = region.cell_centers();
    double s = static_cast<double>(m) * cf.sill();
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j)
            s += 2.0 * cf(detail::distance(cells, i, cells, j));
    const double mm = static_cast<double>(m);
    return sigma0_sq + s / (mm * mm);
}

enum class ErrorKind { random, systematic };

struct ErrorScalingRow {
    long long n;
    double empirical_var;  // variance of the averaged error over replications
    double analytic_var;   // sigma_delta_sq/n, plus sigma0_sq when systematic
};

// Simulates averaging n point errors, reps times per n. Random errors are
// independent draws delta_i ~ N(0, sigma_delta_sq); systematic errors add a
// shared offset y0 ~ N(0, sigma0_sq) redrawn each replication. Averaging
// kills the random part like 1/n but never touches the shared offset.
inline std::vector<ErrorScalingRow> error_scaling_sim(ErrorKind kind, double sigma0_sq,
                                                      double sigma_delta_sq,
                                                      std::span<const long long> n_grid,
                                                      int reps, std::uint64_t seed) {
    if (!(sigma0_sq >= 0.0) || !(sigma_delta_sq >= 0.0))
        throw InputError("error_scaling_sim: variances must be >= 0");
    if (reps < 100)
        throw InputError("error_scaling_sim: reps must be >= 100 for a stable variance");
    if (n_grid.empty())
        throw InputError("error_scaling_sim: n grid is empty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 1)
            throw InputError("error_scaling_sim: n values must be >= 1");
        if (i > 0 && n_grid[i] <= n_grid[i - 1])
            throw InputError("error_scaling_sim: n grid must be strictly increasing");
    }
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd0 = std::sqrt(sigma0_sq);
    const double sdd = std::sqrt(sigma_delta_sq);
    std::vector<ErrorScalingRow> out;
    out.reserve(n_grid.size());
    for (long long n : n_grid) {
        std::vector<double> avg(static_cast<std::size_t>(reps));
        for (int r = 0; r < reps; ++r) {
            // No draw is consumed when sd0 == 0, so a systematic run with
            // sigma0_sq = 0 reproduces the random kind bit for bit.
            double shared = 0.0;
            if (kind == ErrorKind::systematic && sd0 > 0.0) shared = sd0 * normal(engine);
            double s = 0.0;
            for (long long i = 0; i < n; ++i) s += sdd * normal(engine);
            avg[static_cast<std::size_t>(r)] = shared + s / static_cast<double>(n);
        }
        double m = 0.0;
        for (double a : avg) m += a;
        m /= static_cast<double>(reps);
        double ss = 0.0;
        for (double a : avg) ss += (a - m) * (a - m);
        const double empirical = ss / static_cast<double>(reps - 1);
        const double analytic = sigma_delta_sq / static_cast<double>(n) +
                                (kind == ErrorKind::systematic ? sigma0_sq : 0.0);
        out.push_back({n, empirical, analytic});
    }
    return out;
}

} // namespace uqkit::spatial
