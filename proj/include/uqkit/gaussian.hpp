#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "uqkit/errors.hpp"

namespace uqkit::gaussian {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Relative tolerance for accepting a matrix as symmetric.
inline constexpr double kSymmetryRelTol = 1e-12;
// Eigenvalues may undershoot zero by this fraction of the largest eigenvalue.
inline constexpr double kPsdRelTol = 1e-10;
// Conditional variances in [-kVarianceClampTol, 0) are rounded up to zero.
inline constexpr double kVarianceClampTol = 1e-10;

namespace detail {

inline bool is_symmetric(const MatrixXd& a, double rel_tol) {
    if (a.rows() != a.cols()) return false;
    if (a.size() == 0) return true;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline MatrixXd symmetric_part(const MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

} // namespace detail

// True iff `a` is square, symmetric within `tol` (relative), and admits a
// Cholesky factorization.
inline bool is_spd(const MatrixXd& a, double tol = kSymmetryRelTol) {
    if (a.rows() != a.cols() || a.rows() == 0) return false;
    if (!detail::is_symmetric(a, tol)) return false;
    Eigen::LLT<MatrixXd> llt(detail::symmetric_part(a));
    return llt.info() == Eigen::Success;
}

// Symmetric positive-definite matrix with a cached Cholesky factor.
// Construction symmetrizes the input, then rejects anything that is not
// positive definite.
class SpdMatrix {
public:
    explicit SpdMatrix(MatrixXd m) {
        if (m.rows() != m.cols())
            throw InputError("SpdMatrix: matrix must be square, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        if (m.rows() == 0)
            throw InputError("SpdMatrix: matrix must be non-empty");
        if (!detail::is_symmetric(m, kSymmetryRelTol))
            throw InputError("SpdMatrix: matrix is not symmetric");
        m_ = detail::symmetric_part(m);
        llt_.compute(m_);
        if (llt_.info() != Eigen::Success)
            throw InputError("SpdMatrix: matrix is not positive definite");
    }

    const MatrixXd& matrix() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }
    const Eigen::LLT<MatrixXd>& llt() const { return llt_; }

    MatrixXd inverse() const {
        return llt_.solve(MatrixXd::Identity(dim(), dim()));
    }
    VectorXd solve(const VectorXd& b) const { return llt_.solve(b); }
    MatrixXd solve(const MatrixXd& b) const { return llt_.solve(b); }

    double log_det() const {
        const MatrixXd& l = llt_.matrixLLT();
        double s = 0.0;
        for (Eigen::Index i = 0; i < dim(); ++i) s += std::log(l(i, i));
        return 2.0 * s;
    }

private:
    MatrixXd m_;
    Eigen::LLT<MatrixXd> llt_;
};

// Multivariate normal distribution. The covariance must be symmetric within
// kSymmetryRelTol and positive semi-definite: every eigenvalue must be at
// least -kPsdRelTol times the largest eigenvalue. Zero-variance directions
// are allowed.
class GaussianDist {
public:
    GaussianDist(VectorXd mean, MatrixXd cov) : mean_(std::move(mean)) {
        if (cov.rows() != cov.cols())
            throw InputError("GaussianDist: covariance must be square");
        if (mean_.size() != cov.rows())
            throw InputError("GaussianDist: mean has dimension " +
                             std::to_string(mean_.size()) + " but covariance is " +
                             std::to_string(cov.rows()) + "x" + std::to_string(cov.cols()));
        if (mean_.size() == 0)
            throw InputError("GaussianDist: dimension must be positive");
        if (!detail::is_symmetric(cov, kSymmetryRelTol))
            throw InputError("GaussianDist: covariance is not symmetric");
        cov_ = detail::symmetric_part(cov);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov_, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw NumericalError("GaussianDist: eigenvalue computation failed");
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = es.eigenvalues().minCoeff();
        if (lmin < -kPsdRelTol * lmax)
            throw InputError("GaussianDist: covariance is not positive semi-definite "
                             "(min eigenvalue " + std::to_string(lmin) + ")");
    }

    Eigen::Index dim() const { return mean_.size(); }
    const VectorXd& mean() const { return mean_; }
    const MatrixXd& cov() const { return cov_; }

private:
    VectorXd mean_;
    MatrixXd cov_;
};

// Exact Gaussian conditioning. Conditions `joint` on the coordinates in
// `observed_indices` taking the values `observed_values`, and returns the
// conditional distribution of the remaining coordinates.
//
// An empty observed set returns the input unchanged; observing every
// coordinate leaves nothing to describe and is rejected. Conditional
// variances that round-off pushes slightly negative (>= -kVarianceClampTol)
// are clamped to zero with their covariance row zeroed; anything more
// negative reports degenerate conditioning.
inline GaussianDist condition(const GaussianDist& joint,
                              const std::vector<Eigen::Index>& observed_indices,
                              const VectorXd& observed_values) {
    const Eigen::Index n = joint.dim();
    if (static_cast<Eigen::Index>(observed_indices.size()) != observed_values.size())
        throw InputError("condition: " + std::to_string(observed_indices.size()) +
                         " indices but " + std::to_string(observed_values.size()) + " values");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Eigen::Index idx : observed_indices) {
        if (idx < 0 || idx >= n)
            throw InputError("condition: index " + std::to_string(idx) +
                             " out of range for dimension " + std::to_string(n));
        if (seen[static_cast<std::size_t>(idx)])
            throw InputError("condition: duplicate index " + std::to_string(idx));
        seen[static_cast<std::size_t>(idx)] = true;
    }
    if (observed_indices.empty()) return joint;

    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!seen[static_cast<std::size_t>(i)]) free_idx.push_back(i);
    if (free_idx.empty())
        throw InputError("condition: every coordinate is observed; nothing remains to condition");

    const Eigen::Index no = static_cast<Eigen::Index>(observed_indices.size());
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());

    MatrixXd cov_oo(no, no), cov_fo(nf, no), cov_ff(nf, nf);
    VectorXd mean_o(no), mean_f(nf);
    for (Eigen::Index a = 0; a < no; ++a) {
        mean_o(a) = joint.mean()(observed_indices[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < no; ++b)
            cov_oo(a, b) = joint.cov()(observed_indices[static_cast<std::size_t>(a)],
                                       observed_indices[static_cast<std::size_t>(b)]);
    }
    for (Eigen::Index a = 0; a < nf; ++a) {
        mean_f(a) = joint.mean()(free_idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < no; ++b)
            cov_fo(a, b) = joint.cov()(free_idx[static_cast<std::size_t>(a)],
                                       observed_indices[static_cast<std::size_t>(b)]);
        for (Eigen::Index b = 0; b < nf; ++b)
            cov_ff(a, b) = joint.cov()(free_idx[static_cast<std::size_t>(a)],
                                       free_idx[static_cast<std::size_t>(b)]);
    }

    Eigen::LLT<MatrixXd> llt(detail::symmetric_part(cov_oo));
    if (llt.info() != Eigen::Success)
        throw NumericalError("condition: observed block is singular");

    const VectorXd shift = llt.solve(observed_values - mean_o);
    const VectorXd cond_mean = mean_f + cov_fo * shift;
    MatrixXd cond_cov = cov_ff - cov_fo * llt.solve(cov_fo.transpose());
    cond_cov = detail::symmetric_part(cond_cov);
    for (Eigen::Index i = 0; i < nf; ++i) {
        if (cond_cov(i, i) >= 0.0) continue;
        if (cond_cov(i, i) < -kVarianceClampTol)
            throw NumericalError("condition: conditional variance " +
                                 std::to_string(cond_cov(i, i)) +
                                 " is negative beyond the clamp tolerance; "
                                 "conditioning is degenerate");
        cond_cov.row(i).setZero();
        cond_cov.col(i).setZero();
    }
    return GaussianDist(cond_mean, cond_cov);
}

// Draws `n_draws` samples (one per row) from `dist`. Sampling is seeded and
// byte-deterministic: identical inputs give identical output. The covariance
// factor comes from an eigendecomposition, so positive semi-definite
// covariances with zero-variance directions sample exactly.
inline MatrixXd sample(const GaussianDist& dist, std::uint64_t seed, Eigen::Index n_draws) {
    if (n_draws < 1)
        throw InputError("sample: n_draws must be >= 1, got " + std::to_string(n_draws));
    const Eigen::Index d = dist.dim();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(dist.cov());
    if (es.info() != Eigen::Success)
        throw NumericalError("sample: covariance eigendecomposition failed");
    VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
    const MatrixXd factor = es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd z(n_draws, d);
    for (Eigen::Index i = 0; i < n_draws; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            z(i, j) = normal(engine);

    MatrixXd out = z * factor.transpose();
    out.rowwise() += dist.mean().transpose();
    return out;
}

} // namespace uqkit::gaussian
