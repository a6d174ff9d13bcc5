#ifndef URS_SSM_HPP
#define URS_SSM_HPP

#include <utility>
#include <vector>

#include "urs/gaussian.hpp"
#include "urs/pricing.hpp"
#include "urs/reservoir.hpp"
#include "urs/unscented.hpp"

namespace urs {

/// One filtering step's record: predicted prior (a_t, R_t), updated
/// posterior (m_t, C_t), the cross-covariance between the previous
/// posterior and this prior, and the step's log-evidence contribution.
struct FilterState {
    Gaussian posterior;
    Gaussian prior;
    Mat cross_prev;  // Cov(theta_{t-1} | D_{t-1}, theta_t | D_{t-1})
    double log_evidence_increment = 0.0;
};

/// A full forward pass: the time-0 belief plus states for t = 1..T.
struct FilterRun {
    Gaussian initial;
    std::vector<FilterState> states;

    Eigen::Index horizon() const { return static_cast<Eigen::Index>(states.size()); }
};

/// Smoothed marginals for t = 0..T, consecutive cross-covariances
/// Cov(theta_t, theta_{t+1} | D_T) and the smoother gains D_t.
struct SmoothedTrajectory {
    std::vector<Gaussian> marginals;
    std::vector<Mat> cross;
    std::vector<Mat> gains;
};

/// Per-step model plugged into the generic filter: a deterministic
/// evolution map with additive Gaussian noise and a deterministic
/// measurement map with iid observation noise.
struct StepModel {
    VecMap evolve;
    Mat process_noise;
    VecMap measure;
    Vec observation;
    double obs_noise_var = 0.0;
};

/// Unscented prediction through an arbitrary evolution map. Returns the
/// prior N(Xi_mu, Xi_Sigma + W) and the posterior-to-prior cross block.
std::pair<Gaussian, Mat> predict_through(const Gaussian& posterior,
                                         const VecMap& evolve_map,
                                         const Mat& process_noise,
                                         const UtConfig& cfg);

/// Reservoir prediction step.
std::pair<Gaussian, Mat> predict(const ReservoirParams& params,
                                 const Gaussian& posterior, const Vec& u,
                                 const UtConfig& cfg);

struct UpdateResult {
    Gaussian posterior;
    Gaussian predicted_obs;  // N(yhat, Psi_Sigma + v I)
    double log_evidence = 0.0;
};

/// Sigma-point joint measurement update against an observed vector.
UpdateResult update_through(const Gaussian& prior, const VecMap& meas_map,
                            const Vec& observed, double obs_noise_var,
                            const UtConfig& cfg);

/// Measurement update through the volatility readout and Black-Scholes
/// batch pricing. Sigma-point readout values are clamped to
/// [1e-4, 0.9999] before pricing.
UpdateResult update(const Gaussian& prior, const ObservationBatch& batch,
                    double v, const UtConfig& cfg);

/// Measurement map of one observation date (readout, clamp, price).
VecMap pricing_measurement(const std::vector<OptionSpec>& specs);

/// Generic alternating predict/update pass over per-step models.
FilterRun forward_filter_models(const Gaussian& initial,
                                const std::vector<StepModel>& steps,
                                const UtConfig& cfg);

/// Reservoir forward filtering over an input and observation sequence.
FilterRun forward_filter(const ReservoirParams& params, const Gaussian& initial,
                         const std::vector<Vec>& inputs,
                         const std::vector<ObservationBatch>& observations,
                         const UtConfig& cfg);

/// Unscented RTS backward smoothing with consecutive cross-covariances.
SmoothedTrajectory rts_smooth(const FilterRun& run, const UtConfig& cfg);

/// One horizon of a pure prediction rollout.
struct PredictiveStep {
    Gaussian state;   // theta prior at this horizon
    Gaussian sigma;   // scalar readout Gaussian
    Gaussian prices;  // predictive price Gaussian N(yhat, Psi_Sigma + v I)
};

/// Iterated prediction without Bayesian updates: k predictive Gaussians
/// over the volatility readout and the option prices.
std::vector<PredictiveStep> k_step_predict(
    const ReservoirParams& params, const Gaussian& posterior,
    const std::vector<Vec>& future_inputs,
    const std::vector<std::vector<OptionSpec>>& future_specs,
    const UtConfig& cfg);

}  // namespace urs

#endif
