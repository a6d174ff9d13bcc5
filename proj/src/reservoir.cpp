#include "urs/reservoir.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include "urs/rng.hpp"

namespace urs {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logistic_derivative(double x) {
    const double s = logistic(x);
    return s * (1.0 - s);
}

Vec logistic(const Vec& x) {
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = logistic(x(i));
    return out;
}

Vec logistic_derivative(const Vec& x) {
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = logistic_derivative(x(i));
    return out;
}

namespace {

constexpr double kTol = 1e-12;
constexpr int kMaxIters = 20000;

struct PowerResult {
    double value = std::numeric_limits<double>::quiet_NaN();
    Vec vector;       // last iterate (unit norm)
    bool converged = false;
    bool real_pair = false;  // residual of Mv = value*v is small
};

// Power iteration tracking the two-step recurrence z = a*w + b*v; the
// dominant modulus is the largest root modulus of x^2 - a x - b. This
// covers simple real, +/- pairs, and complex-conjugate dominant pairs.
PowerResult power_iterate(const Mat& M, Vec v) {
    const Eigen::Index n = M.rows();
    PowerResult res;
    v.normalize();
    double prev = std::numeric_limits<double>::quiet_NaN();
    int basis_cycle = 0;
    for (int k = 0; k < kMaxIters; ++k) {
        Vec w = M * v;
        const double nw = w.norm();
        if (nw == 0.0) {
            if (basis_cycle >= n) {
                res.value = 0.0;
                res.converged = true;
                res.vector = v;
                return res;
            }
            v = Vec::Unit(n, basis_cycle++);
            continue;
        }
        const Vec z = M * w;

        // Least squares for [w v] [a; b] = z via 2x2 normal equations.
        const double ww = w.squaredNorm(), vv = 1.0, wv = w.dot(v);
        const double zw = z.dot(w), zv = z.dot(v);
        const double det = ww * vv - wv * wv;
        double est, resid;
        if (det > 1e-14 * ww) {
            const double a = (zw * vv - zv * wv) / det;
            const double b = (ww * zv - wv * zw) / det;
            const double disc = a * a + 4.0 * b;
            if (disc >= 0.0) {
                const double r = std::sqrt(disc);
                est = std::max(std::abs((a + r) / 2.0), std::abs((a - r) / 2.0));
            } else {
                est = std::sqrt(-b);
            }
            resid = (z - a * w - b * v).norm() / std::max(z.norm(), 1e-300);
        } else {
            // w collinear with v: v is (nearly) an eigenvector already.
            est = nw;
            resid = (z - (z.dot(w) / ww) * w).norm() / std::max(z.norm(), 1e-300);
        }

        if (std::isfinite(prev) && std::abs(est - prev) <= kTol * std::max(1.0, est) &&
            resid <= 1e-9) {
            res.value = est;
            res.vector = w / nw;
            res.converged = true;
            res.real_pair = (M * res.vector - est * res.vector).norm() <=
                            1e-6 * std::max(1.0, est);
            return res;
        }
        prev = est;
        v = w / nw;
    }
    res.vector = v;
    res.value = prev;
    return res;
}

double spectral_radius_impl(const Mat& M, int depth) {
    const Eigen::Index n = M.rows();
    if (n == 1) return std::abs(M(0, 0));
    if (M.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    Rng rng(0x5ca1ab1eULL + static_cast<std::uint64_t>(depth));
    PowerResult best;
    for (int attempt = 0; attempt < 2; ++attempt) {
        PowerResult res = power_iterate(M, rng.normal_vector(n));
        if (res.converged) return res.value;
        if (!best.vector.size() || std::isfinite(res.value)) best = res;
    }

    // Stagnation: if the current iterate is close to a real eigenpair,
    // deflate it out (Wielandt) and recurse on the remainder.
    if (depth < 2 && best.vector.size() && std::isfinite(best.value)) {
        const Vec& v = best.vector;
        const double lambda = v.dot(M * v) / v.squaredNorm();
        if ((M * v - lambda * v).norm() <= 1e-8 * std::max(1.0, std::abs(lambda))) {
            const Mat deflated = M - lambda * v * v.transpose() / v.squaredNorm();
            return std::max(std::abs(lambda), spectral_radius_impl(deflated, depth + 1));
        }
    }
    throw NumericalError("spectral_radius: power iteration did not converge");
}

}  // namespace

double spectral_radius(const Mat& M) {
    require_shape(M.rows() == M.cols() && M.rows() >= 1,
                  "spectral_radius: matrix must be square and non-empty");
    if (!M.allFinite()) throw NumericalError("spectral_radius: non-finite entries");
    return spectral_radius_impl(M, 0);
}

ReservoirParams init_reservoir(const InitConfig& cfg) {
    if (!(cfg.eta1 > 0.0 && cfg.eta1 < 1.0))
        throw ConfigError("init_reservoir: eta1 must lie in (0, 1)");
    if (!(cfg.eta2 > 0.0)) throw ConfigError("init_reservoir: eta2 must be positive");
    if (cfg.p < 1 || cfg.m < 1)
        throw ConfigError("init_reservoir: dimensions must be at least 1");
    if (!(cfg.w_prior >= 0.0) || !(cfg.v_prior > 0.0))
        throw ConfigError("init_reservoir: invalid noise priors");

    Rng rng(cfg.seed);
    Mat G = rng.normal_matrix(cfg.p, cfg.p);
    Mat G_in = rng.normal_matrix(cfg.p, cfg.m);

    double rho = spectral_radius(G);
    if (rho == 0.0) {
        G = rng.normal_matrix(cfg.p, cfg.p);
        rho = spectral_radius(G);
        if (rho == 0.0)
            throw NumericalError("init_reservoir: drawn G has zero spectral radius");
    }

    ReservoirParams params;
    params.G = (cfg.eta1 / rho) * G;
    params.G_in = cfg.eta2 * G_in;
    if (cfg.bias_init == BiasInit::gaussian) {
        params.b = Vec::Constant(cfg.p, cfg.bias_mean) +
                   std::sqrt(cfg.bias_var) * rng.normal_vector(cfg.p);
    } else {
        params.b = Vec::Constant(cfg.p, cfg.bias_mean);
    }
    params.W = cfg.w_prior * Mat::Identity(cfg.p, cfg.p);
    params.v = cfg.v_prior;
    params.input_gain = cfg.input_gain;
    params.init_seed = cfg.seed;
    return params;
}

Vec evolve(const ReservoirParams& params, const Vec& theta_prev, const Vec& u) {
    require_shape(theta_prev.size() == params.state_dim(),
                  "evolve: state dimension mismatch");
    require_shape(u.size() == params.input_dim(),
                  "evolve: input dimension mismatch");
    if (!theta_prev.allFinite() || !u.allFinite())
        throw NumericalError("evolve: non-finite inputs");
    const Vec pre = params.G * theta_prev +
                    params.input_gain * (params.G_in * u.cwiseProduct(u)) +
                    params.b;
    return logistic(pre);
}

double readout(const Vec& theta) {
    require_shape(theta.size() >= 1, "readout: empty state vector");
    return theta.mean();
}

Gaussian readout_gaussian(const Gaussian& g) {
    require_shape(g.dim() >= 1, "readout_gaussian: empty Gaussian");
    const double p = static_cast<double>(g.dim());
    Vec mean(1);
    mean(0) = g.mean().mean();
    Mat var(1, 1);
    var(0, 0) = g.cov().sum() / (p * p);
    return Gaussian(mean, var);
}

}  // namespace urs
