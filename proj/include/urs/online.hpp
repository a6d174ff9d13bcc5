#ifndef URS_ONLINE_HPP
#define URS_ONLINE_HPP

#include <vector>

#include "urs/gem.hpp"
#include "urs/series.hpp"
#include "urs/ssm.hpp"

namespace urs {

/// Index map between the augmented state (theta; G; G_in; b) and the
/// parameter matrices, row-major.
struct AugmentedLayout {
    Eigen::Index p = 0;
    Eigen::Index m = 0;

    Eigen::Index dim() const { return p + p * p + p * m + p; }
    Eigen::Index theta_offset() const { return 0; }
    Eigen::Index param_offset() const { return p; }
    Eigen::Index param_dim() const { return p * p + p * m + p; }

    Vec flatten(const Vec& theta, const ReservoirParams& params) const;
    /// Splits a flat vector; W, v and the input gain are taken from
    /// `like` (they are not part of the augmented state).
    void unflatten(const Vec& flat, Vec* theta, ReservoirParams* params,
                   const ReservoirParams& like) const;
};

struct OnlineConfig {
    double param_innovation_var = 1e-6;
    double param_prior_var = 1e-3;
    int outer_iterations = 5;
    double min_validation_improvement = 1e-5;

    double initial_state_mean = 0.15;
    double initial_state_var = 1e-2;

    UtConfig ut;
};

/// Deterministic augmented evolution: the theta block moves through the
/// reservoir parameterized by the flat parameter block, the parameter
/// block is copied unchanged.
Vec augmented_evolve(const Vec& aug, const Vec& u, const AugmentedLayout& layout,
                     const ReservoirParams& like);

struct OnlinePassRecord {
    double validation_error = 0.0;
    double terminal_spectral_radius = 0.0;
};

struct OnlineResult {
    /// Smoothed augmented beliefs of the best pass, t = 0..T.
    std::vector<Gaussian> trajectory;
    /// Spectral radius of the parameter-mean G at each filtered step.
    std::vector<double> spectral_radii;
    std::vector<OnlinePassRecord> passes;
    ReservoirParams final_params;
    Gaussian terminal_belief;  // augmented posterior at T
    AugmentedLayout layout;
};

/// Joint-UKF online inference: filter and smooth the augmented state,
/// reset the time-0 belief to the smoothed one, and repeat until the
/// validation error stops improving.
OnlineResult online_fit(const SeriesData& data, const SplitSpec& split,
                        const ReservoirParams& init_params,
                        const OnlineConfig& cfg);

}  // namespace urs

#endif
