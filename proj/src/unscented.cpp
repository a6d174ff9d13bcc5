#include "urs/unscented.hpp"

#include <cmath>
#include <sstream>

namespace urs {

namespace {

void check_scaling(const UtConfig& cfg, Eigen::Index p) {
    if (cfg.alpha <= 0.0) throw ConfigError("UtConfig: alpha must be positive");
    if (std::abs(static_cast<double>(p) + cfg.lambda(p)) < 1e-300)
        throw ConfigError("UtConfig: p + lambda must be nonzero");
}

Vec apply_checked(const VecMap& f, const Vec& x, Eigen::Index point_index) {
    Vec y = f(x);
    if (!y.allFinite()) {
        std::ostringstream msg;
        msg << "unscented transform: map returned non-finite values at sigma point "
            << point_index;
        throw NumericalError(msg.str());
    }
    return y;
}

struct WeightedMoments {
    Vec mean;
    Mat cov_raw;  // before repair
};

WeightedMoments moments(const Mat& pts, const Vec& wm, const Vec& wc) {
    WeightedMoments out;
    out.mean = pts.transpose() * wm;
    const Eigen::Index d = pts.cols();
    out.cov_raw = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        const Vec diff = pts.row(i).transpose() - out.mean;
        out.cov_raw.noalias() += wc(i) * diff * diff.transpose();
    }
    return out;
}

}  // namespace

double UtConfig::lambda(Eigen::Index p) const {
    return alpha * alpha * (static_cast<double>(p) + kappa) -
           static_cast<double>(p);
}

Vec SigmaPointSet::reconstruct_mean() const {
    return points.transpose() * mean_weights;
}

Mat SigmaPointSet::reconstruct_cov() const {
    return moments(points, mean_weights, cov_weights).cov_raw;
}

SigmaPointSet sigma_points(const Gaussian& g, const UtConfig& cfg) {
    const Eigen::Index p = g.dim();
    require_shape(p >= 1, "sigma_points: empty Gaussian");
    check_scaling(cfg, p);
    const double lambda = cfg.lambda(p);
    const double scale = static_cast<double>(p) + lambda;

    const Mat root = psd_sqrt(scale * g.cov());

    SigmaPointSet set;
    set.points.resize(2 * p + 1, p);
    set.points.row(0) = g.mean().transpose();
    for (Eigen::Index i = 0; i < p; ++i) {
        set.points.row(1 + i) = (g.mean() + root.col(i)).transpose();
        set.points.row(1 + p + i) = (g.mean() - root.col(i)).transpose();
    }

    set.mean_weights.setConstant(2 * p + 1, 1.0 / (2.0 * scale));
    set.cov_weights = set.mean_weights;
    set.mean_weights(0) = lambda / scale;
    set.cov_weights(0) = lambda / scale + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    return set;
}

Gaussian unscented_transform(const Gaussian& g, const VecMap& f,
                             const UtConfig& cfg) {
    const SigmaPointSet set = sigma_points(g, cfg);
    Mat transformed;
    for (Eigen::Index i = 0; i < set.count(); ++i) {
        const Vec q = apply_checked(f, set.points.row(i).transpose(), i);
        if (i == 0) transformed.resize(set.count(), q.size());
        transformed.row(i) = q.transpose();
    }
    const auto m = moments(transformed, set.mean_weights, set.cov_weights);
    return Gaussian(m.mean, repair_covariance(m.cov_raw));
}

JointGaussian augmented_transform(const Gaussian& g, const VecMap& f,
                                  const UtConfig& cfg) {
    const SigmaPointSet set = sigma_points(g, cfg);
    Mat transformed;
    for (Eigen::Index i = 0; i < set.count(); ++i) {
        const Vec q = apply_checked(f, set.points.row(i).transpose(), i);
        if (i == 0) transformed.resize(set.count(), q.size());
        transformed.row(i) = q.transpose();
    }
    const auto in = moments(set.points, set.mean_weights, set.cov_weights);
    const auto out = moments(transformed, set.mean_weights, set.cov_weights);

    Mat cross = Mat::Zero(g.dim(), transformed.cols());
    for (Eigen::Index i = 0; i < set.count(); ++i) {
        const Vec di = set.points.row(i).transpose() - in.mean;
        const Vec dq = transformed.row(i).transpose() - out.mean;
        cross.noalias() += set.cov_weights(i) * di * dq.transpose();
    }

    JointGaussian joint;
    joint.first = Gaussian(in.mean, repair_covariance(in.cov_raw));
    joint.second = Gaussian(out.mean, repair_covariance(out.cov_raw));
    joint.cross = cross;
    return joint;
}

JointGaussian joint_gaussian_from_two_stage(const JointGaussian& g_joint,
                                            const Mat& A, const Vec& c,
                                            const VecMap& nonlinearity,
                                            const UtConfig& cfg) {
    const Eigen::Index d1 = g_joint.first.dim();
    const Eigen::Index d2 = g_joint.second.dim();
    require_shape(A.cols() == d1,
                  "joint_gaussian_from_two_stage: A columns mismatch");
    require_shape(c.size() == A.rows(),
                  "joint_gaussian_from_two_stage: offset dimension mismatch");

    // Exact affine stage on the first block.
    const Vec mean1 = A * g_joint.first.mean() + c;
    const Mat cov11 = symmetrized(A * g_joint.first.cov() * A.transpose());
    const Mat cross1 = A * g_joint.cross;

    JointGaussian affine_pair{Gaussian(mean1, cov11), g_joint.second, cross1};
    const Gaussian stacked = affine_pair.assembled();

    // Sigma-point stage: nonlinearity on the first block, identity on the
    // second, in one pass over the stacked Gaussian.
    const Eigen::Index d1p = mean1.size();
    const auto partial = [&](const Vec& x) -> Vec {
        Vec y(x.size());
        y.head(d1p) = nonlinearity(x.head(d1p));
        y.tail(d2) = x.tail(d2);
        return y;
    };
    const Gaussian joint_out = unscented_transform(stacked, partial, cfg);

    JointGaussian result;
    result.first = Gaussian(joint_out.mean().head(d1p),
                            repair_covariance(joint_out.cov().topLeftCorner(d1p, d1p)));
    result.second = Gaussian(joint_out.mean().tail(d2),
                             repair_covariance(joint_out.cov().bottomRightCorner(d2, d2)));
    result.cross = joint_out.cov().topRightCorner(d1p, d2);
    return result;
}

}  // namespace urs
