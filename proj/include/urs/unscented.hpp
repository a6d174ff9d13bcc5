#ifndef URS_UNSCENTED_HPP
#define URS_UNSCENTED_HPP

#include "urs/gaussian.hpp"
#include "urs/types.hpp"

namespace urs {

/// Unscented-transform scaling parameters. Defaults follow the standard
/// recommendation (alpha = 0.001, beta = 2, kappa = 0).
struct UtConfig {
    double alpha = 0.001;
    double beta = 2.0;
    double kappa = 0.0;

    /// lambda = alpha^2 (p + kappa) - p for state dimension p.
    double lambda(Eigen::Index p) const;
};

/// 2p+1 sigma points (rows) with their mean and covariance weights.
struct SigmaPointSet {
    Mat points;        // (2p+1) x p
    Vec mean_weights;  // 2p+1
    Vec cov_weights;   // 2p+1

    Eigen::Index count() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }

    /// Weighted mean of the points.
    Vec reconstruct_mean() const;
    /// Weighted outer-product covariance of the points.
    Mat reconstruct_cov() const;
};

/// Sigma points of g: the mean plus symmetric deviations along the
/// scaled columns of the lower Cholesky factor of cov.
SigmaPointSet sigma_points(const Gaussian& g, const UtConfig& cfg);

/// Gaussian approximation of f(x), x ~ g, via the unscented transform.
Gaussian unscented_transform(const Gaussian& g, const VecMap& f,
                             const UtConfig& cfg);

/// Joint of (x, f(x)) from a single sigma-point pass: each point is
/// carried through both the identity and f, so the cross-covariance
/// between input and output is tracked alongside the marginals.
JointGaussian augmented_transform(const Gaussian& g, const VecMap& f,
                                  const UtConfig& cfg);

/// Two-stage propagation of a correlated pair (x1, x2): the exact affine
/// step (A x1 + c, x2) followed by an unscented pass of the nonlinearity
/// over the first block only. Returns (nl(A x1 + c), x2) with its
/// cross-covariance.
JointGaussian joint_gaussian_from_two_stage(const JointGaussian& g_joint,
                                            const Mat& A, const Vec& c,
                                            const VecMap& nonlinearity,
                                            const UtConfig& cfg);

}  // namespace urs

#endif
