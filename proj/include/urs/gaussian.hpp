#ifndef URS_GAUSSIAN_HPP
#define URS_GAUSSIAN_HPP

#include <Eigen/Cholesky>

#include "urs/types.hpp"

namespace urs {

/// Dense multivariate normal belief. Covariance is symmetrized on
/// construction; operations that produce covariances route them through
/// repair_covariance() so the stored matrix stays PSD.
class Gaussian {
public:
    Gaussian() = default;
    Gaussian(Vec mean, Mat cov);

    Eigen::Index dim() const { return mean_.size(); }
    const Vec& mean() const { return mean_; }
    const Mat& cov() const { return cov_; }

    /// Point mass at x (zero covariance).
    static Gaussian point_mass(const Vec& x);

private:
    Vec mean_;
    Mat cov_;
};

/// Two marginals plus their cross-covariance Cov(first, second),
/// as produced by the augmented transforms and the smoother.
struct JointGaussian {
    Gaussian first;
    Gaussian second;
    Mat cross;  // dim(first) x dim(second)

    /// Stacked (first; second) Gaussian with the full block covariance.
    Gaussian assembled() const;
};

/// (C + C^T)/2.
Mat symmetrized(const Mat& m);

/// Symmetrize and clip eigenvalues below 1e-12 * lambda_max up to that
/// floor. Applied after every covariance-producing operation.
Mat repair_covariance(const Mat& m);

/// Lower factor F with F F^T = m for PSD m. Plain Cholesky when positive
/// definite; pivoted LDL^T with clamped diagonal for semidefinite inputs
/// (zero columns along null directions); jitter escalation
/// (1e-12 -> 1e-6 of the diagonal scale, x10 steps) before giving up.
Mat psd_sqrt(const Mat& m);

/// Solve m * X = rhs for symmetric positive definite m with the same
/// jitter escalation. Throws NumericalError with a condition-number
/// estimate if the floor is exceeded.
Mat solve_spd(const Mat& m, const Mat& rhs);

/// N(A*mean + c, A*cov*A^T), exact.
Gaussian affine_transform(const Gaussian& g, const Mat& A, const Vec& c);

/// Condition the first block on an observed value of the second.
Gaussian condition(const JointGaussian& j, const Vec& observed_value);

/// E[x^T Minv x] = tr(Minv*cov) + mean^T Minv mean.
double expect_quadratic_form(const Gaussian& g, const Mat& Minv);

/// Log density of x under g (requires invertible covariance).
double log_density(const Gaussian& g, const Vec& x);

}  // namespace urs

#endif
