#include "urs/gaussian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

namespace urs {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kEigClip = 1e-12;
constexpr double kJitterStart = 1e-12;
constexpr double kJitterStop = 1e-6;

double diag_scale(const Mat& m) {
    const double s = m.diagonal().cwiseAbs().maxCoeff();
    return s > 0.0 ? s : 1.0;
}

}  // namespace

Gaussian::Gaussian(Vec mean, Mat cov) : mean_(std::move(mean)) {
    require_shape(cov.rows() == mean_.size() && cov.cols() == mean_.size(),
                  "Gaussian: covariance shape does not match mean dimension");
    if (!mean_.allFinite() || !cov.allFinite())
        throw NumericalError("Gaussian: non-finite mean or covariance");
    if (cov.size() > 0 && (cov - cov.transpose()).cwiseAbs().maxCoeff() >
                              kSymTol * (1.0 + cov.cwiseAbs().maxCoeff()))
        throw ShapeError("Gaussian: covariance is not symmetric within tolerance");
    cov_ = symmetrized(cov);
}

Gaussian Gaussian::point_mass(const Vec& x) {
    return Gaussian(x, Mat::Zero(x.size(), x.size()));
}

Gaussian JointGaussian::assembled() const {
    const auto d1 = first.dim(), d2 = second.dim();
    require_shape(cross.rows() == d1 && cross.cols() == d2,
                  "JointGaussian: cross-covariance shape mismatch");
    Vec mean(d1 + d2);
    mean << first.mean(), second.mean();
    Mat cov(d1 + d2, d1 + d2);
    cov.topLeftCorner(d1, d1) = first.cov();
    cov.topRightCorner(d1, d2) = cross;
    cov.bottomLeftCorner(d2, d1) = cross.transpose();
    cov.bottomRightCorner(d2, d2) = second.cov();
    return Gaussian(mean, cov);
}

Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat repair_covariance(const Mat& m) {
    require_shape(m.rows() == m.cols(), "repair_covariance: matrix not square");
    if (m.size() == 0) return m;
    Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(m));
    if (eig.info() != Eigen::Success)
        throw NumericalError("repair_covariance: eigendecomposition failed");
    Vec vals = eig.eigenvalues();
    const double floor = kEigClip * std::max(vals.maxCoeff(), 0.0);
    if (vals.minCoeff() >= floor) return symmetrized(m);
    vals = vals.cwiseMax(floor);
    return symmetrized(eig.eigenvectors() * vals.asDiagonal() *
                       eig.eigenvectors().transpose());
}

Mat psd_sqrt(const Mat& m) {
    require_shape(m.rows() == m.cols(), "psd_sqrt: matrix not square");
    const Eigen::Index n = m.rows();
    if (n == 0) return m;
    const Mat sym = symmetrized(m);
    if (sym.cwiseAbs().maxCoeff() == 0.0) return Mat::Zero(n, n);

    Eigen::LLT<Mat> llt(sym);
    if (llt.info() == Eigen::Success) return llt.matrixL();

    // Semidefinite case: pivoted LDL^T with clamped diagonal gives an
    // exact factor with zero columns along the null space.
    Eigen::LDLT<Mat> ldlt(sym);
    if (ldlt.info() == Eigen::Success) {
        Vec d = ldlt.vectorD();
        const double dscale = d.cwiseAbs().maxCoeff();
        if (d.minCoeff() >= -1e-10 * (dscale > 0 ? dscale : 1.0)) {
            Mat l = ldlt.matrixL();
            Mat factor = ldlt.transpositionsP().transpose() *
                         (l * d.cwiseMax(0.0).cwiseSqrt().asDiagonal());
            return factor;
        }
    }

    const double scale = diag_scale(sym);
    for (double jitter = kJitterStart; jitter <= kJitterStop; jitter *= 10.0) {
        Eigen::LLT<Mat> attempt(sym + jitter * scale * Mat::Identity(n, n));
        if (attempt.info() == Eigen::Success) return attempt.matrixL();
    }
    throw NumericalError("psd_sqrt: Cholesky failed after jitter escalation");
}

Mat solve_spd(const Mat& m, const Mat& rhs) {
    require_shape(m.rows() == m.cols(), "solve_spd: matrix not square");
    require_shape(m.rows() == rhs.rows(), "solve_spd: rhs row mismatch");
    const Mat sym = symmetrized(m);
    const Eigen::Index n = m.rows();
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    const double scale = diag_scale(sym);
    for (double jitter = kJitterStart; jitter <= kJitterStop; jitter *= 10.0) {
        Eigen::LLT<Mat> attempt(sym + jitter * scale * Mat::Identity(n, n));
        if (attempt.info() == Eigen::Success) return attempt.solve(rhs);
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
    std::ostringstream msg;
    msg << "solve_spd: singular matrix beyond regularization floor";
    if (eig.info() == Eigen::Success) {
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        msg << " (eigenvalue range [" << lo << ", " << hi
            << "], condition estimate " << (lo != 0.0 ? hi / std::abs(lo) : INFINITY)
            << ")";
    }
    throw NumericalError(msg.str());
}

Gaussian affine_transform(const Gaussian& g, const Mat& A, const Vec& c) {
    require_shape(A.cols() == g.dim(),
                  "affine_transform: A columns must match Gaussian dimension");
    require_shape(A.rows() == c.size(),
                  "affine_transform: A rows must match offset dimension");
    return Gaussian(A * g.mean() + c, symmetrized(A * g.cov() * A.transpose()));
}

Gaussian condition(const JointGaussian& j, const Vec& observed_value) {
    require_shape(observed_value.size() == j.second.dim(),
                  "condition: observed value dimension mismatch");
    // m1 + S12 S22^{-1} (x2 - m2), S11 - S12 S22^{-1} S21
    const Mat gain =
        solve_spd(j.second.cov(), j.cross.transpose()).transpose();
    const Vec mean =
        j.first.mean() + gain * (observed_value - j.second.mean());
    const Mat cov = j.first.cov() - gain * j.cross.transpose();
    return Gaussian(mean, repair_covariance(cov));
}

double expect_quadratic_form(const Gaussian& g, const Mat& Minv) {
    require_shape(Minv.rows() == Minv.cols() && Minv.rows() == g.dim(),
                  "expect_quadratic_form: matrix dimension mismatch");
    return (Minv * g.cov()).trace() + g.mean().dot(Minv * g.mean());
}

double log_density(const Gaussian& g, const Vec& x) {
    require_shape(x.size() == g.dim(), "log_density: point dimension mismatch");
    const Eigen::Index n = g.dim();
    const Mat sym = symmetrized(g.cov());
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() != Eigen::Success) {
        const double scale = diag_scale(sym);
        double jitter = kJitterStart;
        for (; jitter <= kJitterStop; jitter *= 10.0) {
            llt.compute(sym + jitter * scale * Mat::Identity(n, n));
            if (llt.info() == Eigen::Success) break;
        }
        if (llt.info() != Eigen::Success)
            throw NumericalError("log_density: covariance not invertible");
    }
    const Vec diff = x - g.mean();
    const Vec w = llt.matrixL().solve(diff);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        log_det += std::log(llt.matrixL()(i, i));
    return -0.5 * w.squaredNorm() - log_det -
           0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace urs
