#ifndef URS_EVAL_HPP
#define URS_EVAL_HPP

#include <map>
#include <optional>
#include <vector>

#include "urs/series.hpp"
#include "urs/ssm.hpp"

namespace urs {

/// Mean relative prediction error of one forecast date,
/// (1/I) sum |yhat - y| / y. Realized prices must be positive.
double relative_error_step(const Vec& predicted, const Vec& realized);

/// Inverse standard normal CDF (central-interval half-widths).
double inverse_normal_cdf(double prob);

/// One recorded forecast: origin, horizon, price point predictions and
/// the predictive volatility belief, plus what was realized.
struct ForecastRecord {
    Eigen::Index origin = 0;  // series index of the forecast origin
    int horizon = 0;
    Vec predicted_prices;
    Vec predicted_price_var;  // diagonal of the price predictive
    double sigma_mean = 0.0;
    double sigma_var = 0.0;
    Vec realized_prices;
    std::optional<double> realized_sigma;
    double rel_error = 0.0;
};

/// Observed coverage fraction per nominal level per horizon.
struct CoverageCurve {
    Vec nominal;
    std::map<int, Vec> observed;
};

struct EvalConfig {
    std::vector<int> horizons = {1, 5, 10, 15, 20};
    Vec nominal_levels;        // defaults to 0.05..0.95 step 0.05
    Eigen::Index validation_len = 1;
    UtConfig ut;

    EvalConfig();
};

struct EvalResult {
    std::map<int, double> mean_rel_error;  // per horizon
    CoverageCurve coverage;
    std::vector<ForecastRecord> records;
    bool coverage_against_sigma = false;  // true when ground truth was given
};

/// The rolling k-step testing protocol: freeze the parameters, filter
/// through the training slice, Bayesian-update through the validation
/// steps, then per origin predict k steps without updates, record the
/// errors, update one step and advance. Coverage is measured against the
/// ground-truth volatility when provided, otherwise against realized
/// prices under the price predictive.
EvalResult rolling_k_step_eval(const ReservoirParams& params,
                               const Gaussian& initial_belief,
                               const SeriesData& series, Eigen::Index train_len,
                               const EvalConfig& cfg,
                               const std::vector<double>* ground_truth_sigma);

}  // namespace urs

#endif
