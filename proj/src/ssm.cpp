#include "urs/ssm.hpp"

#include <algorithm>
#include <cmath>

namespace urs {

namespace {

constexpr double kSigmaClampLo = 1e-4;
constexpr double kSigmaClampHi = 0.9999;

}  // namespace

std::pair<Gaussian, Mat> predict_through(const Gaussian& posterior,
                                         const VecMap& evolve_map,
                                         const Mat& process_noise,
                                         const UtConfig& cfg) {
    require_shape(process_noise.rows() == process_noise.cols(),
                  "predict_through: process noise must be square");
    const JointGaussian aug = augmented_transform(posterior, evolve_map, cfg);
    require_shape(process_noise.rows() == aug.second.dim(),
                  "predict_through: process noise dimension mismatch");
    Gaussian prior(aug.second.mean(),
                   symmetrized(aug.second.cov() + process_noise));
    return {std::move(prior), aug.cross};
}

std::pair<Gaussian, Mat> predict(const ReservoirParams& params,
                                 const Gaussian& posterior, const Vec& u,
                                 const UtConfig& cfg) {
    const VecMap map = [&params, u](const Vec& theta) {
        return evolve(params, theta, u);
    };
    return predict_through(posterior, map, params.W, cfg);
}

UpdateResult update_through(const Gaussian& prior, const VecMap& meas_map,
                            const Vec& observed, double obs_noise_var,
                            const UtConfig& cfg) {
    if (!(obs_noise_var >= 0.0))
        throw DomainError("update_through: negative observation noise");
    const JointGaussian aug = augmented_transform(prior, meas_map, cfg);
    require_shape(observed.size() == aug.second.dim(),
                  "update_through: observation dimension mismatch");

    const Eigen::Index n_obs = observed.size();
    const Mat innovation_cov =
        aug.second.cov() + obs_noise_var * Mat::Identity(n_obs, n_obs);
    const Mat gain = solve_spd(innovation_cov, aug.cross.transpose()).transpose();

    UpdateResult out;
    const Vec innovation = observed - aug.second.mean();
    out.posterior = Gaussian(
        prior.mean() + gain * innovation,
        repair_covariance(prior.cov() - gain * innovation_cov * gain.transpose()));
    out.predicted_obs = Gaussian(aug.second.mean(), symmetrized(innovation_cov));
    out.log_evidence = log_density(out.predicted_obs, observed);
    return out;
}

VecMap pricing_measurement(const std::vector<OptionSpec>& specs) {
    return [specs](const Vec& theta) {
        const double sigma =
            std::clamp(readout(theta), kSigmaClampLo, kSigmaClampHi);
        return batch_price(specs, sigma);
    };
}

UpdateResult update(const Gaussian& prior, const ObservationBatch& batch,
                    double v, const UtConfig& cfg) {
    batch.validate();
    return update_through(prior, pricing_measurement(batch.specs), batch.prices,
                          v, cfg);
}

FilterRun forward_filter_models(const Gaussian& initial,
                                const std::vector<StepModel>& steps,
                                const UtConfig& cfg) {
    FilterRun run;
    run.initial = initial;
    run.states.reserve(steps.size());
    Gaussian belief = initial;
    for (const StepModel& step : steps) {
        auto [prior, cross] =
            predict_through(belief, step.evolve, step.process_noise, cfg);
        UpdateResult upd = update_through(prior, step.measure, step.observation,
                                          step.obs_noise_var, cfg);
        FilterState state;
        state.prior = std::move(prior);
        state.cross_prev = std::move(cross);
        state.posterior = upd.posterior;
        state.log_evidence_increment = upd.log_evidence;
        belief = state.posterior;
        run.states.push_back(std::move(state));
    }
    return run;
}

FilterRun forward_filter(const ReservoirParams& params, const Gaussian& initial,
                         const std::vector<Vec>& inputs,
                         const std::vector<ObservationBatch>& observations,
                         const UtConfig& cfg) {
    require_shape(inputs.size() == observations.size(),
                  "forward_filter: inputs and observations must have equal length");
    std::vector<StepModel> steps;
    steps.reserve(inputs.size());
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        observations[t].validate();
        StepModel step;
        const Vec u = inputs[t];
        step.evolve = [&params, u](const Vec& theta) {
            return evolve(params, theta, u);
        };
        step.process_noise = params.W;
        step.measure = pricing_measurement(observations[t].specs);
        step.observation = observations[t].prices;
        step.obs_noise_var = params.v;
        steps.push_back(std::move(step));
    }
    return forward_filter_models(initial, steps, cfg);
}

SmoothedTrajectory rts_smooth(const FilterRun& run, const UtConfig&) {
    if (run.states.empty())
        throw ContractError("rts_smooth: filter pass must be non-empty");
    const auto T = run.horizon();

    SmoothedTrajectory traj;
    traj.marginals.resize(T + 1);
    traj.cross.resize(T);
    traj.gains.resize(T);

    // Terminal condition: the smoothed end marginal is the last posterior.
    traj.marginals[T] = run.states[T - 1].posterior;

    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const Gaussian& filtered =
            (t == 0) ? run.initial : run.states[t - 1].posterior;
        const FilterState& next = run.states[t];  // time t+1
        const Gaussian& ahead = traj.marginals[t + 1];

        const Mat gain =
            solve_spd(next.prior.cov(), next.cross_prev.transpose()).transpose();

        const Vec mean =
            filtered.mean() + gain * (ahead.mean() - next.prior.mean());
        const Mat cov =
            filtered.cov() +
            gain * (ahead.cov() - next.prior.cov()) * gain.transpose();

        traj.marginals[t] = Gaussian(mean, repair_covariance(cov));
        traj.cross[t] = gain * ahead.cov();
        traj.gains[t] = gain;
    }
    return traj;
}

std::vector<PredictiveStep> k_step_predict(
    const ReservoirParams& params, const Gaussian& posterior,
    const std::vector<Vec>& future_inputs,
    const std::vector<std::vector<OptionSpec>>& future_specs,
    const UtConfig& cfg) {
    require_shape(!future_inputs.empty(), "k_step_predict: needs k >= 1");
    require_shape(future_inputs.size() == future_specs.size(),
                  "k_step_predict: inputs and specs must have equal length");

    std::vector<PredictiveStep> out;
    out.reserve(future_inputs.size());
    Gaussian belief = posterior;
    for (std::size_t j = 0; j < future_inputs.size(); ++j) {
        belief = predict(params, belief, future_inputs[j], cfg).first;

        PredictiveStep step;
        step.state = belief;
        step.sigma = readout_gaussian(belief);
        const Gaussian propagated =
            unscented_transform(belief, pricing_measurement(future_specs[j]), cfg);
        const Eigen::Index n_obs = propagated.dim();
        step.prices = Gaussian(
            propagated.mean(),
            symmetrized(propagated.cov() + params.v * Mat::Identity(n_obs, n_obs)));
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace urs
