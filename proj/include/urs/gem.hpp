#ifndef URS_GEM_HPP
#define URS_GEM_HPP

#include <optional>
#include <vector>

#include "urs/series.hpp"
#include "urs/ssm.hpp"

namespace urs {

enum class TermIiMethod { joint_ut, taylor };

/// Offline generalized-EM settings.
struct GemConfig {
    double lasso_alpha = 0.05;
    TermIiMethod term_ii_method = TermIiMethod::joint_ut;
    int max_iters = 60;

    double initial_step = 1e-2;
    double backtrack_factor = 0.5;
    int max_backtracks = 40;
    double step_grow = 2.0;

    int validation_patience = 6;
    double min_validation_improvement = 1e-5;  // relative

    // Time-0 state belief N(mean * 1, var * I).
    double initial_state_mean = 0.15;
    double initial_state_var = 1e-2;

    UtConfig ut;
};

/// Per-step values of the five expected-log-likelihood terms.
struct EStepTerms {
    double term_i = 0.0;
    double term_ii = 0.0;
    double term_iii = 0.0;
    Vec term_iv;  // per option
    Vec term_v;   // per option
};

/// Everything the E-step evaluates once per outer iteration: the five
/// per-step terms plus the UT statistics they were assembled from.
struct EStepCache {
    std::vector<EStepTerms> per_step;  // t = 1..T
    std::vector<Vec> xi_mu;            // UT mean of theta_{t-1}|D_T through evolve
    std::vector<Mat> xi_sigma;         // matching UT covariance
    std::vector<Vec> psi_mu;           // per-option measurement means at smoothed sigma
    std::vector<Vec> psi_var;          // matching measurement variances
};

/// Deterministic-path log-likelihood (evolution means evaluated exactly
/// at the given states); the additive 2-pi constant is dropped.
double log_likelihood(const std::vector<Vec>& traj_states,
                      const ReservoirParams& params, const SeriesData& data);

/// Expected complete-data log-likelihood over the smoothed trajectory.
std::pair<double, EStepCache> expected_loglik(const SmoothedTrajectory& traj,
                                              const ReservoirParams& params,
                                              const SeriesData& data,
                                              const GemConfig& cfg);

/// Term ii by the two-stage joint unscented route,
/// tr(Winv * S**) + m_t^T Winv Xi_mu.
double term_ii_joint_ut(const JointGaussian& pair, const ReservoirParams& params,
                        const Vec& u, const Mat& Winv, const UtConfig& cfg);

/// Term ii by first-order Taylor linearization of the logistic.
double term_ii_taylor(const JointGaussian& pair, const ReservoirParams& params,
                      const Vec& u, const Mat& Winv);

/// Regularized loss: negative expected log-likelihood plus the Lasso
/// penalty alpha * (|G|_1 + |G_in|_1); b is never penalized.
double loss(const SmoothedTrajectory& traj, const ReservoirParams& params,
            const SeriesData& data, const GemConfig& cfg);

// ----------------------------------------------------------------------
// M-step machinery. The smoothed trajectory is held fixed while the
// parameters move, so the smooth objective is precomputed into a context
// that can be re-evaluated cheaply during line search.

/// Fixed per-iteration context: smoothed statistics, input vectors and
/// observation sums, ready for repeated evaluation at candidate params.
class EStepContext {
public:
    EStepContext(const SmoothedTrajectory& traj, const SeriesData& data,
                 const UtConfig& ut);

    /// Smooth part of the loss (negative expected log-likelihood).
    double smooth_loss(const ReservoirParams& params, TermIiMethod method) const;

    /// Smooth loss and its gradient with respect to
    /// (G, G_in, b, chol(W), log v), reverse-mode.
    std::pair<double, Vec> smooth_loss_grad(const ReservoirParams& params,
                                            TermIiMethod method) const;

    /// Same evaluation, also emitting the spec-facing cache and the
    /// expected log-likelihood value.
    std::pair<double, EStepCache> expected_loglik(const ReservoirParams& params,
                                                  TermIiMethod method) const;

    Eigen::Index horizon() const { return static_cast<Eigen::Index>(steps_.size()); }

private:
    struct Step {
        Gaussian prev;        // theta_{t-1} | D_T
        Gaussian cur;         // theta_t | D_T
        Mat cross;            // Cov(theta_{t-1}, theta_t | D_T)
        SigmaPointSet prev_sigma;
        Vec u_squared;
        Vec prices;           // observed y_t
        Vec psi_mu, psi_var;  // measurement UT at the smoothed readout
        double meas_sum = 0.0;  // sum_i y^2 - 2 y iv + v-term
    };
    std::vector<Step> steps_;
    UtConfig ut_;
    Eigen::Index obs_total_ = 0;

    friend struct EStepEval;
};

/// Flat packing of the optimized parameter vector
/// [G row-major, G_in row-major, b, tril(chol W) row-major, log v].
Vec pack_params(const ReservoirParams& params);
ReservoirParams unpack_params(const Vec& packed, Eigen::Index p, Eigen::Index m,
                              const ReservoirParams& like);

struct GemIterationRecord {
    double regularized_loss = 0.0;
    double smooth_loss = 0.0;
    double validation_error = 0.0;
    double step_size = 0.0;
    bool accepted = false;
    double g_l1 = 0.0;
    double g_in_l1 = 0.0;
};

struct GemReport {
    std::vector<GemIterationRecord> iterations;
    TermIiMethod method = TermIiMethod::joint_ut;
    bool aborted_non_finite = false;
    int best_iteration = -1;
    double best_validation_error = 0.0;
};

/// Mean one-step relative prediction error over the validation slice,
/// updating the belief between validation steps.
double validation_error(const ReservoirParams& params, const Gaussian& trained_belief,
                        const SeriesData& validation, const UtConfig& ut);

/// Offline fit (filter -> smooth -> proximal gradient step, repeated
/// until the validation error stops improving).
std::pair<ReservoirParams, GemReport> gem_fit(const SeriesData& data,
                                              const SplitSpec& split,
                                              const ReservoirParams& init_params,
                                              const GemConfig& cfg);

}  // namespace urs

#endif
