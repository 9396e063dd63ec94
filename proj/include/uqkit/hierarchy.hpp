#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>

#include "uqkit/errors.hpp"
#include "uqkit/gaussian.hpp"

namespace uqkit::hierarchy {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using gaussian::GaussianDist;
using gaussian::SpdMatrix;

// Two-level linear-Gaussian model: a latent state y with Gaussian prior
// N(prior_mean, prior_cov), observed through z = offset + forward * y + eps,
// eps ~ N(0, noise_cov).
class LinearHM {
public:
    LinearHM(VectorXd offset, MatrixXd forward, SpdMatrix noise_cov,
             VectorXd prior_mean, SpdMatrix prior_cov)
        : offset_(std::move(offset)),
          forward_(std::move(forward)),
          noise_cov_(std::move(noise_cov)),
          prior_mean_(std::move(prior_mean)),
          prior_cov_(std::move(prior_cov)) {
        if (offset_.size() != forward_.rows())
            throw InputError("LinearHM: offset has dimension " + std::to_string(offset_.size()) +
                             " but the forward map has " + std::to_string(forward_.rows()) + " rows");
        if (noise_cov_.dim() != forward_.rows())
            throw InputError("LinearHM: noise covariance dimension " +
                             std::to_string(noise_cov_.dim()) + " does not match data dimension " +
                             std::to_string(forward_.rows()));
        if (prior_mean_.size() != forward_.cols())
            throw InputError("LinearHM: prior mean dimension " + std::to_string(prior_mean_.size()) +
                             " does not match state dimension " + std::to_string(forward_.cols()));
        if (prior_cov_.dim() != forward_.cols())
            throw InputError("LinearHM: prior covariance dimension " +
                             std::to_string(prior_cov_.dim()) + " does not match state dimension " +
                             std::to_string(forward_.cols()));
    }

    const VectorXd& offset() const { return offset_; }
    const MatrixXd& forward() const { return forward_; }
    const SpdMatrix& noise_cov() const { return noise_cov_; }
    const VectorXd& prior_mean() const { return prior_mean_; }
    const SpdMatrix& prior_cov() const { return prior_cov_; }

    Eigen::Index data_dim() const { return forward_.rows(); }
    Eigen::Index state_dim() const { return forward_.cols(); }

private:
    VectorXd offset_;
    MatrixXd forward_;
    SpdMatrix noise_cov_;
    VectorXd prior_mean_;
    SpdMatrix prior_cov_;
};

// Posterior of the latent state given one data vector, plus the gain that
// produced it.
struct Retrieval {
    VectorXd predictive_mean;
    SpdMatrix predictive_cov;
    MatrixXd gain;
};

namespace detail {

// Posterior precision S = prior_cov^-1 + forward' noise_cov^-1 forward,
// returned with its Cholesky factor.
inline std::pair<MatrixXd, Eigen::LLT<MatrixXd>> posterior_precision(const LinearHM& hm) {
    const MatrixXd prior_prec = hm.prior_cov().inverse();
    const MatrixXd noise_prec = hm.noise_cov().inverse();
    MatrixXd s = prior_prec + hm.forward().transpose() * noise_prec * hm.forward();
    s = gaussian::detail::symmetric_part(s);
    Eigen::LLT<MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw NumericalError("posterior precision is not positive definite");
    return {std::move(s), std::move(llt)};
}

inline MatrixXd gain_matrix(const LinearHM& hm) {
    auto [s, llt] = posterior_precision(hm);
    const MatrixXd noise_prec = hm.noise_cov().inverse();
    return llt.solve(hm.forward().transpose() * noise_prec);
}

} // namespace detail

// Exact posterior of the latent state given data z:
//   cov  = (prior_cov^-1 + forward' noise_cov^-1 forward)^-1
//   gain = cov * forward' noise_cov^-1
//   mean = prior_mean + gain * (z - offset - forward * prior_mean)
inline Retrieval predictive_distribution(const LinearHM& hm, const VectorXd& z) {
    if (z.size() != hm.data_dim())
        throw InputError("predictive_distribution: data has dimension " +
                         std::to_string(z.size()) + " but the model expects " +
                         std::to_string(hm.data_dim()));
    auto [s, llt] = detail::posterior_precision(hm);
    const Eigen::Index p = hm.state_dim();
    MatrixXd cov = llt.solve(MatrixXd::Identity(p, p));
    cov = gaussian::detail::symmetric_part(cov);
    const MatrixXd noise_prec = hm.noise_cov().inverse();
    const MatrixXd gain = llt.solve(hm.forward().transpose() * noise_prec);
    const VectorXd innovation = z - hm.offset() - hm.forward() * hm.prior_mean();
    VectorXd mean = hm.prior_mean() + gain * innovation;
    return Retrieval{std::move(mean), SpdMatrix(cov), gain};
}

// Scalar special case: state y ~ N(prior_mean, prior_var) observed as
// z = y + eps with eps ~ N(0, noise_var).
struct ScalarUpdate {
    double mean;
    double var;
};

inline ScalarUpdate univariate_update(double prior_mean, double prior_var,
                                      double noise_var, double z) {
    if (!(prior_var > 0.0))
        throw InputError("univariate_update: prior variance must be positive");
    if (!(noise_var > 0.0))
        throw InputError("univariate_update: noise variance must be positive");
    const double prec = 1.0 / prior_var + 1.0 / noise_var;
    const double var = 1.0 / prec;
    const double mean = var * (prior_mean / prior_var + z / noise_var);
    return {mean, var};
}

// Frobenius norm of prec(y|z) - prec(y) - forward' prec(z|y) forward, which
// is zero in exact arithmetic for any forward-map shape.
inline double precision_decomposition_residual(const LinearHM& hm) {
    auto [s, llt] = detail::posterior_precision(hm);
    const Eigen::Index p = hm.state_dim();
    MatrixXd cov = llt.solve(MatrixXd::Identity(p, p));
    cov = gaussian::detail::symmetric_part(cov);
    Eigen::LLT<MatrixXd> cov_llt(cov);
    if (cov_llt.info() != Eigen::Success)
        throw NumericalError("precision_decomposition_residual: posterior covariance "
                             "is not positive definite");
    const MatrixXd posterior_prec = cov_llt.solve(MatrixXd::Identity(p, p));
    const MatrixXd noise_prec = hm.noise_cov().inverse();
    const MatrixXd rebuilt = hm.prior_cov().inverse() +
                             hm.forward().transpose() * noise_prec * hm.forward();
    return (posterior_prec - rebuilt).norm();
}

// Checks E[posterior mean] = prior mean by simulating data from the model's
// z-marginal N(offset + forward * prior_mean, forward prior_cov forward' + noise_cov).
struct UnbiasednessCheck {
    VectorXd analytic;     // prior mean
    VectorXd monte_carlo;  // average posterior mean over simulated data
    VectorXd std_error;    // per-coordinate Monte Carlo standard error
};

inline UnbiasednessCheck unbiasedness_check(const LinearHM& hm, Eigen::Index n_draws,
                                            std::uint64_t seed) {
    if (n_draws < 2)
        throw InputError("unbiasedness_check: n_draws must be >= 2");
    const VectorXd z_mean = hm.offset() + hm.forward() * hm.prior_mean();
    const MatrixXd z_cov = hm.forward() * hm.prior_cov().matrix() * hm.forward().transpose() +
                           hm.noise_cov().matrix();
    const GaussianDist z_marginal(z_mean, z_cov);
    const MatrixXd draws = gaussian::sample(z_marginal, seed, n_draws);

    const MatrixXd gain = detail::gain_matrix(hm);
    // Posterior mean for draw i: prior_mean + gain * (z_i - z_mean).
    MatrixXd centered = draws;
    centered.rowwise() -= z_mean.transpose();
    const MatrixXd posterior_means = centered * gain.transpose();

    VectorXd avg = posterior_means.colwise().mean().transpose();
    VectorXd se(hm.state_dim());
    for (Eigen::Index j = 0; j < hm.state_dim(); ++j) {
        const double m = avg(j);
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n_draws; ++i) {
            const double dev = posterior_means(i, j) - m;
            ss += dev * dev;
        }
        se(j) = std::sqrt(ss / static_cast<double>(n_draws - 1) /
                          static_cast<double>(n_draws));
    }
    return {hm.prior_mean(), hm.prior_mean() + avg, std::move(se)};
}

// True first two moments of the estimation error yhat - y when yhat is the
// posterior mean under `working` but (y, z) are generated by `truth`.
struct TMDiagnostics {
    VectorXd true_bias;
    MatrixXd true_uncertainty;
};

// With G the working-model gain and A = G * truth.forward() - I:
//   bias        = wm_mean + G (c_T - c_W - K_W wm_mean) + A tm_mean
//   uncertainty = A Sigma_T A' + G noise_T G'
// When working == truth the bias is zero and the uncertainty equals the
// working model's posterior covariance.
inline TMDiagnostics wm_tm_diagnostics(const LinearHM& working, const LinearHM& truth) {
    if (working.state_dim() != truth.state_dim())
        throw InputError("wm_tm_diagnostics: state dimensions differ (" +
                         std::to_string(working.state_dim()) + " vs " +
                         std::to_string(truth.state_dim()) + ")");
    if (working.data_dim() != truth.data_dim())
        throw InputError("wm_tm_diagnostics: data dimensions differ (" +
                         std::to_string(working.data_dim()) + " vs " +
                         std::to_string(truth.data_dim()) + ")");
    const MatrixXd gain = detail::gain_matrix(working);
    const Eigen::Index p = working.state_dim();
    const MatrixXd a = gain * truth.forward() - MatrixXd::Identity(p, p);
    const VectorXd bias = working.prior_mean() +
                          gain * (truth.offset() - working.offset() -
                                  working.forward() * working.prior_mean()) +
                          a * truth.prior_mean();
    MatrixXd uncert = a * truth.prior_cov().matrix() * a.transpose() +
                      gain * truth.noise_cov().matrix() * gain.transpose();
    uncert = gaussian::detail::symmetric_part(uncert);
    return {bias, std::move(uncert)};
}

// Monte Carlo estimate of E[yhat - y] when (y, z) are generated by `truth`
// and yhat is the posterior mean under `working`, with per-coordinate
// standard errors.
struct McBias {
    VectorXd bias;
    VectorXd std_error;
};

inline McBias wm_tm_mc_bias(const LinearHM& working, const LinearHM& truth,
                            Eigen::Index n_draws, std::uint64_t seed) {
    if (n_draws < 2)
        throw InputError("wm_tm_mc_bias: n_draws must be >= 2");
    if (working.state_dim() != truth.state_dim() || working.data_dim() != truth.data_dim())
        throw InputError("wm_tm_mc_bias: model dimensions differ");
    const GaussianDist state_prior(truth.prior_mean(), truth.prior_cov().matrix());
    const GaussianDist noise(VectorXd::Zero(truth.data_dim()), truth.noise_cov().matrix());
    const MatrixXd y = gaussian::sample(state_prior, seed, n_draws);
    const MatrixXd eps = gaussian::sample(noise, seed ^ 0x9e3779b97f4a7c15ULL, n_draws);

    MatrixXd z = y * truth.forward().transpose() + eps;
    z.rowwise() += truth.offset().transpose();

    const MatrixXd gain = detail::gain_matrix(working);
    MatrixXd innovation = z;
    innovation.rowwise() -=
        (working.offset() + working.forward() * working.prior_mean()).transpose();
    MatrixXd err = innovation * gain.transpose() - y;
    err.rowwise() += working.prior_mean().transpose();

    VectorXd bias = err.colwise().mean().transpose();
    VectorXd se(working.state_dim());
    for (Eigen::Index j = 0; j < working.state_dim(); ++j) {
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n_draws; ++i) {
            const double dev = err(i, j) - bias(j);
            ss += dev * dev;
        }
        se(j) = std::sqrt(ss / static_cast<double>(n_draws - 1) /
                          static_cast<double>(n_draws));
    }
    return {std::move(bias), std::move(se)};
}

// Moments the working model naively reports for yhat - y about itself: zero
// bias and the posterior covariance. Equals wm_tm_diagnostics(working,
// working); exposed so callers can contrast the self-report with the truth.
inline TMDiagnostics naive_wm_moments(const LinearHM& working) {
    auto [s, llt] = detail::posterior_precision(working);
    const Eigen::Index p = working.state_dim();
    MatrixXd cov = llt.solve(MatrixXd::Identity(p, p));
    cov = gaussian::detail::symmetric_part(cov);
    return {VectorXd::Zero(p), std::move(cov)};
}

} // namespace uqkit::hierarchy
