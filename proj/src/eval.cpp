#include "urs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace urs {

double relative_error_step(const Vec& predicted, const Vec& realized) {
    require_shape(predicted.size() == realized.size() && predicted.size() >= 1,
                  "relative_error_step: vector length mismatch");
    if ((realized.array() <= 0.0).any())
        throw DomainError("relative_error_step: realized prices must be positive");
    return ((predicted - realized).cwiseAbs().cwiseQuotient(realized)).mean();
}

double inverse_normal_cdf(double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw DomainError("inverse_normal_cdf: probability must lie in (0,1)");
    // Acklam's rational approximation with one Halley refinement.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425, p_high = 1.0 - p_low;
    double x;
    if (prob < p_low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= p_high) {
        const double q = prob - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
            q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - prob;
    const double u =
        e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

EvalConfig::EvalConfig() {
    nominal_levels.resize(19);
    for (int i = 0; i < 19; ++i) nominal_levels(i) = 0.05 * (i + 1);
}

EvalResult rolling_k_step_eval(const ReservoirParams& params,
                               const Gaussian& initial_belief,
                               const SeriesData& series, Eigen::Index train_len,
                               const EvalConfig& cfg,
                               const std::vector<double>* ground_truth_sigma) {
    series.validate();
    const Eigen::Index N = series.size();
    const Eigen::Index V = cfg.validation_len;
    if (train_len < 1 || train_len + V >= N)
        throw ContractError("rolling_k_step_eval: split leaves no test segment");
    if (cfg.horizons.empty())
        throw ContractError("rolling_k_step_eval: no horizons requested");
    if (ground_truth_sigma &&
        static_cast<Eigen::Index>(ground_truth_sigma->size()) != N)
        throw ShapeError("rolling_k_step_eval: ground truth length mismatch");

    const int min_horizon =
        *std::min_element(cfg.horizons.begin(), cfg.horizons.end());
    for (int k : cfg.horizons)
        if (train_len + V + k > N)
            throw ContractError(
                "rolling_k_step_eval: test segment shorter than a horizon");

    // Filter through training, then Bayesian-update through validation.
    const SeriesData train = series.slice(0, train_len);
    const FilterRun run = forward_filter(params, initial_belief, train.inputs,
                                         train.observations, cfg.ut);
    Gaussian belief =
        run.states.empty() ? run.initial : run.states.back().posterior;
    for (Eigen::Index t = train_len; t < train_len + V; ++t) {
        auto [prior, cross] = predict(params, belief, series.inputs[t], cfg.ut);
        (void)cross;
        belief = update(prior, series.observations[t], params.v, cfg.ut).posterior;
    }

    EvalResult result;
    result.coverage_against_sigma = (ground_truth_sigma != nullptr);
    result.coverage.nominal = cfg.nominal_levels;
    const Eigen::Index n_levels = cfg.nominal_levels.size();
    std::map<int, Vec> hits;
    std::map<int, double> trials;
    std::map<int, double> err_sum;
    std::map<int, int> err_count;
    for (int k : cfg.horizons) {
        hits[k] = Vec::Zero(n_levels);
        trials[k] = 0.0;
        err_sum[k] = 0.0;
        err_count[k] = 0;
    }

    // Rolling origins: predict, record, then update one step and advance.
    for (Eigen::Index origin = train_len + V;
         origin + min_horizon <= N;
         ++origin) {
        const int max_k_here = static_cast<int>(N - origin);
        int k_need = 0;
        for (int k : cfg.horizons)
            if (k <= max_k_here) k_need = std::max(k_need, k);
        if (k_need > 0) {
            std::vector<Vec> future_inputs;
            std::vector<std::vector<OptionSpec>> future_specs;
            for (int j = 0; j < k_need; ++j) {
                future_inputs.push_back(series.inputs[origin + j]);
                future_specs.push_back(series.observations[origin + j].specs);
            }
            const auto steps =
                k_step_predict(params, belief, future_inputs, future_specs, cfg.ut);

            for (int k : cfg.horizons) {
                if (k > max_k_here) continue;
                const PredictiveStep& step = steps[k - 1];
                const auto& realized = series.observations[origin + k - 1];

                ForecastRecord rec;
                rec.origin = origin;
                rec.horizon = k;
                rec.predicted_prices = step.prices.mean();
                rec.predicted_price_var = step.prices.cov().diagonal();
                rec.sigma_mean = step.sigma.mean()(0);
                rec.sigma_var = step.sigma.cov()(0, 0);
                rec.realized_prices = realized.prices;
                rec.rel_error =
                    relative_error_step(rec.predicted_prices, realized.prices);
                if (ground_truth_sigma)
                    rec.realized_sigma = (*ground_truth_sigma)[origin + k - 1];

                err_sum[k] += rec.rel_error;
                err_count[k] += 1;

                for (Eigen::Index li = 0; li < n_levels; ++li) {
                    const double z =
                        inverse_normal_cdf(0.5 + 0.5 * cfg.nominal_levels(li));
                    if (ground_truth_sigma) {
                        const double half = z * std::sqrt(std::max(rec.sigma_var, 0.0));
                        if (std::abs(*rec.realized_sigma - rec.sigma_mean) <= half)
                            hits[k](li) += 1.0;
                    } else {
                        // price-interval coverage, averaged over the batch
                        double covered = 0.0;
                        for (Eigen::Index i = 0; i < realized.prices.size(); ++i) {
                            const double half =
                                z * std::sqrt(std::max(rec.predicted_price_var(i), 0.0));
                            if (std::abs(realized.prices(i) -
                                         rec.predicted_prices(i)) <= half)
                                covered += 1.0;
                        }
                        hits[k](li) +=
                            covered / static_cast<double>(realized.prices.size());
                    }
                }
                trials[k] += 1.0;
                result.records.push_back(std::move(rec));
            }
        }

        // One-step Bayesian update to move the origin forward.
        if (origin < N) {
            auto [prior, cross] =
                predict(params, belief, series.inputs[origin], cfg.ut);
            (void)cross;
            belief =
                update(prior, series.observations[origin], params.v, cfg.ut)
                    .posterior;
        }
    }

    for (int k : cfg.horizons) {
        if (err_count[k] == 0)
            throw ContractError("rolling_k_step_eval: no origins for a horizon");
        result.mean_rel_error[k] = err_sum[k] / static_cast<double>(err_count[k]);
        result.coverage.observed[k] = hits[k] / std::max(trials[k], 1.0);
    }
    return result;
}

}  // namespace urs
