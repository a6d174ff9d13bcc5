#ifndef URS_RESERVOIR_HPP
#define URS_RESERVOIR_HPP

#include <cstdint>

#include "urs/gaussian.hpp"
#include "urs/types.hpp"

namespace urs {

/// Numerically stable logistic activation.
double logistic(double x);
/// Logistic derivative e^{-x} / (1 + e^{-x})^2.
double logistic_derivative(double x);
Vec logistic(const Vec& x);
Vec logistic_derivative(const Vec& x);

/// Learnable parameter set of the echo-state state-space model:
/// evolution matrix G, input matrix G_in, bias b, evolution noise W and
/// scalar observation noise v.
struct ReservoirParams {
    Mat G;       // p x p
    Mat G_in;    // p x m
    Vec b;       // p
    Mat W;       // p x p, symmetric PSD
    double v = 0.0;  // > 0

    /// Scalar gain applied to the squared input inside evolve. Squared
    /// daily returns are ~1e-4, so a configurable gain keeps the input
    /// term on a usable scale. Default 1 (no rescaling).
    double input_gain = 1.0;

    std::uint64_t init_seed = 0;

    Eigen::Index state_dim() const { return G.rows(); }
    Eigen::Index input_dim() const { return G_in.cols(); }
};

enum class BiasInit {
    /// b ~ N(bias_mean * 1, bias_var * I), the stochastic draw.
    gaussian,
    /// Every coordinate set to bias_mean (the option-experiment default).
    constant,
};

/// Reservoir initialization settings. The shrinkage defaults mirror the
/// recommended echo-state practice (eta1 = 0.97, eta2 = 0.85).
struct InitConfig {
    Eigen::Index p = 8;
    Eigen::Index m = 10;
    double eta1 = 0.97;
    double eta2 = 0.85;
    double bias_mean = -2.0;
    double bias_var = 1.0;
    BiasInit bias_init = BiasInit::gaussian;
    std::uint64_t seed = 0;

    double w_prior = 1e-4;  // W = w_prior * I
    double v_prior = 1e-2;
    double input_gain = 1.0;
};

/// Largest eigenvalue modulus, via power iteration with a two-step
/// recurrence fit (handles complex dominant pairs) and Wielandt
/// deflation as a stagnation fallback.
double spectral_radius(const Mat& M);

/// Draw reservoir weights and rescale so spectral_radius(G) = eta1.
/// Deterministic given the seed.
ReservoirParams init_reservoir(const InitConfig& cfg);

/// One deterministic evolution step: logistic(G theta + G_in u^2 + b)
/// with the square taken elementwise. Every output coordinate is in (0,1).
Vec evolve(const ReservoirParams& params, const Vec& theta_prev, const Vec& u);

/// Volatility readout: the mean of the state coordinates.
double readout(const Vec& theta);

/// Exact readout of a Gaussian state belief: the scalar Gaussian of the
/// coordinate average.
Gaussian readout_gaussian(const Gaussian& g);

}  // namespace urs

#endif
