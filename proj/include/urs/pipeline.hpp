#ifndef URS_PIPELINE_HPP
#define URS_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "urs/eval.hpp"
#include "urs/gem.hpp"
#include "urs/market_data.hpp"
#include "urs/online.hpp"
#include "urs/serialize.hpp"
#include "urs/synthetic.hpp"

namespace urs {

/// Resolved settings of one CLI run. Defaults reproduce the short-series
/// option experiment configuration (p = 8, m = 10, I = 5, alpha = 0.05,
/// constant bias -2.3).
struct RunConfig {
    // reservoir
    Eigen::Index p = 8;
    Eigen::Index m = 10;
    double eta1 = 0.97;
    double eta2 = 0.85;
    std::string bias_policy = "constant";  // constant | gaussian
    double bias_mean = -2.3;
    double bias_var = 1.0;
    double w_prior = 1e-4;
    double v_prior = 1e-2;
    double input_gain = 1.0;

    // unscented transform
    double ut_alpha = 0.001;
    double ut_beta = 2.0;
    double ut_kappa = 0.0;

    // offline inference
    double lasso_alpha = 0.05;
    std::string term_ii_method = "joint_ut";  // joint_ut | taylor
    int gem_max_iters = 60;
    double initial_state_mean = 0.15;
    double initial_state_var = 1e-2;

    // online inference
    Eigen::Index online_p = 4;
    double param_innovation_var = 1e-6;
    double param_prior_var = 1e-3;
    int online_passes = 5;

    // data sources
    std::string dataset_dir;
    std::string options_csv;
    std::string spot_csv;
    std::string rates_csv;
    std::string checkpoint;
    Eigen::Index top_i = 5;

    // split
    Eigen::Index validation_len = 1;
    Eigen::Index test_len = 24;

    // synthetic generation
    double cir_v0 = 0.15;
    double cir_mu = 0.15;
    double cir_theta = 10.0;
    double cir_sigma = 0.04;
    Eigen::Index cir_n = 200;
    double kappa_v = 0.01;
    double p0 = 2000.0;
    double rate = 0.02;
    std::string kappa_interpretation = "stdev";  // stdev | variance
    std::string return_convention = "stdev_is_vt";
    int maturity_days_lo = 21;
    int maturity_days_hi = 252;
    double strike_lo = 0.90;
    double strike_hi = 1.10;
    double min_price_fraction = 0.02;

    // evaluation
    std::vector<int> horizons = {1, 5, 10, 15, 20};
    int study_seeds = 0;  // evaluate: replicate the full pipeline over seeds

    // run
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int jobs = 1;
    int forecast_steps = 20;
};

Json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const Json& j);

/// All violated fields at once; empty when valid for the given command.
std::vector<std::string> validate_run_config(const RunConfig& cfg,
                                             const std::string& command);

// Converters into the module configs.
SyntheticConfig make_synthetic_config(const RunConfig& cfg);
InitConfig make_init_config(const RunConfig& cfg, Eigen::Index p_override = -1);
UtConfig make_ut_config(const RunConfig& cfg);
GemConfig make_gem_config(const RunConfig& cfg);
OnlineConfig make_online_config(const RunConfig& cfg);
EvalConfig make_eval_config(const RunConfig& cfg);

/// A series plus optional synthetic ground truth, from whichever source
/// the config names (dataset bundle or market CSV files).
struct LoadedSeries {
    SeriesData series;
    std::optional<std::vector<double>> ground_truth;
    std::vector<std::string> dates;
    Eigen::Index ingest_dropped_dates = 0;
    Eigen::Index ingest_short_batches = 0;
};
LoadedSeries load_series(const RunConfig& cfg);

// Command bodies. Each writes outputs plus a resolved-config JSON into
// cfg.out_dir and throws typed errors on failure.
void run_simulate(const RunConfig& cfg);
void run_train_offline(const RunConfig& cfg);
void run_train_online(const RunConfig& cfg);
void run_forecast(const RunConfig& cfg);
void run_evaluate(const RunConfig& cfg);

/// One replication of the synthetic experiment: generate, fit offline,
/// run the rolling protocol against the ground truth.
struct SeedOutcome {
    std::uint64_t seed = 0;
    std::map<int, double> mean_rel_error;
    std::map<int, double> coverage95;
};

struct StudyOutcome {
    std::vector<SeedOutcome> per_seed;
    std::map<int, double> mean_rel_error;  // averaged over seeds
    std::map<int, double> coverage95;
};

SeedOutcome run_synthetic_replication(const RunConfig& cfg, std::uint64_t seed);

/// Replicated study over `seeds` seeds on a worker pool of cfg.jobs
/// threads; aggregation order is fixed by seed index.
StudyOutcome run_synthetic_study(const RunConfig& cfg,
                                 const std::vector<std::uint64_t>& seeds);

}  // namespace urs

#endif
