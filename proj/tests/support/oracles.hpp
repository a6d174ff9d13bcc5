// Test-only reference implementations, kept independent of the library
// code paths they validate.
#ifndef URS_TESTS_SUPPORT_ORACLES_HPP
#define URS_TESTS_SUPPORT_ORACLES_HPP

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <vector>

#include "urs/gaussian.hpp"
#include "urs/rng.hpp"
#include "urs/types.hpp"

namespace urs::testing {

// ---------------------------------------------------------------------
// Exact linear-Gaussian filtering and smoothing (textbook Kalman/RTS).

struct LinearSystem {
    Mat A;         // evolution
    Vec c;         // evolution offset
    Mat Q;         // process noise covariance
    Mat H;         // measurement
    Vec d;         // measurement offset
    double v = 0;  // iid observation noise variance
};

struct KalmanStep {
    Vec prior_mean, post_mean;
    Mat prior_cov, post_cov;
    Mat cross_prev;  // Cov(x_{t-1}|D_{t-1}, x_t|D_{t-1}) = C_{t-1} A^T
    double log_evidence = 0.0;
};

struct KalmanSmoothed {
    std::vector<Vec> means;   // t = 0..T
    std::vector<Mat> covs;    // t = 0..T
    std::vector<Mat> cross;   // Cov(x_t, x_{t+1} | D_T), t = 0..T-1
    std::vector<Mat> gains;   // D_t
};

inline std::vector<KalmanStep> kalman_filter(const LinearSystem& sys,
                                             const Vec& m0, const Mat& C0,
                                             const std::vector<Vec>& ys) {
    std::vector<KalmanStep> out;
    Vec m = m0;
    Mat C = C0;
    const Eigen::Index n_obs = sys.H.rows();
    for (const Vec& y : ys) {
        KalmanStep step;
        step.cross_prev = C * sys.A.transpose();
        step.prior_mean = sys.A * m + sys.c;
        step.prior_cov = sys.A * C * sys.A.transpose() + sys.Q;

        const Vec yhat = sys.H * step.prior_mean + sys.d;
        const Mat S = sys.H * step.prior_cov * sys.H.transpose() +
                      sys.v * Mat::Identity(n_obs, n_obs);
        const Mat K = step.prior_cov * sys.H.transpose() * S.inverse();
        step.post_mean = step.prior_mean + K * (y - yhat);
        step.post_cov = step.prior_cov - K * S * K.transpose();

        const Vec diff = y - yhat;
        step.log_evidence =
            -0.5 * diff.dot(S.inverse() * diff) - 0.5 * std::log(S.determinant()) -
            0.5 * static_cast<double>(n_obs) * std::log(2.0 * std::numbers::pi);

        m = step.post_mean;
        C = step.post_cov;
        out.push_back(std::move(step));
    }
    return out;
}

inline KalmanSmoothed rts_smooth_oracle(const LinearSystem& sys, const Vec& m0,
                                        const Mat& C0,
                                        const std::vector<KalmanStep>& steps) {
    const auto T = static_cast<Eigen::Index>(steps.size());
    KalmanSmoothed out;
    out.means.resize(T + 1);
    out.covs.resize(T + 1);
    out.cross.resize(T);
    out.gains.resize(T);
    out.means[T] = steps[T - 1].post_mean;
    out.covs[T] = steps[T - 1].post_cov;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const Vec m = (t == 0) ? m0 : steps[t - 1].post_mean;
        const Mat C = (t == 0) ? C0 : steps[t - 1].post_cov;
        const Mat D = C * sys.A.transpose() * steps[t].prior_cov.inverse();
        out.means[t] = m + D * (out.means[t + 1] - steps[t].prior_mean);
        out.covs[t] =
            C + D * (out.covs[t + 1] - steps[t].prior_cov) * D.transpose();
        out.cross[t] = D * out.covs[t + 1];
        out.gains[t] = D;
    }
    return out;
}

/// Random stable linear system: spectral radius of A kept below 0.95.
inline LinearSystem random_linear_system(Rng& rng, Eigen::Index p,
                                         Eigen::Index n_obs) {
    LinearSystem sys;
    sys.A = rng.normal_matrix(p, p);
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Mat>(sys.A).eigenvalues();
    const double rho = eig.cwiseAbs().maxCoeff();
    sys.A *= 0.7 / std::max(rho, 0.1);
    sys.c = 0.3 * rng.normal_vector(p);
    const Mat q = rng.normal_matrix(p, p);
    sys.Q = 0.05 * (q * q.transpose()) / static_cast<double>(p) +
            0.01 * Mat::Identity(p, p);
    sys.H = rng.normal_matrix(n_obs, p);
    sys.d = 0.2 * rng.normal_vector(n_obs);
    sys.v = 0.04;
    return sys;
}

/// Simulate a trajectory + observations from a linear system.
inline std::vector<Vec> simulate_linear(const LinearSystem& sys, const Vec& x0,
                                        Eigen::Index T, Rng& rng) {
    std::vector<Vec> ys;
    Vec x = x0;
    const Mat Lq = Eigen::LLT<Mat>(sys.Q).matrixL();
    for (Eigen::Index t = 0; t < T; ++t) {
        x = sys.A * x + sys.c + Lq * rng.normal_vector(x.size());
        Vec y = sys.H * x + sys.d;
        for (Eigen::Index i = 0; i < y.size(); ++i)
            y(i) += std::sqrt(sys.v) * rng.normal();
        ys.push_back(y);
    }
    return ys;
}

// ---------------------------------------------------------------------
// Sampling helpers.

/// Draw from a Gaussian via the (semidefinite-safe) covariance factor.
inline Vec sample_gaussian(const Gaussian& g, Rng& rng) {
    return g.mean() + psd_sqrt(g.cov()) * rng.normal_vector(g.dim());
}

struct MonteCarloStat {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Online mean and standard error accumulator.
class Welford {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    double mean() const { return mean_; }
    double standard_error() const {
        return n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1) /
                                  static_cast<double>(n_))
                      : 0.0;
    }
    long long count() const { return n_; }

private:
    long long n_ = 0;
    double mean_ = 0.0, m2_ = 0.0;
};

}  // namespace urs::testing

#endif
