#include "urs/online.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "urs/eval.hpp"

namespace urs {

Vec AugmentedLayout::flatten(const Vec& theta, const ReservoirParams& params) const {
    require_shape(theta.size() == p, "AugmentedLayout: theta dimension mismatch");
    require_shape(params.state_dim() == p && params.input_dim() == m,
                  "AugmentedLayout: parameter shape mismatch");
    Vec flat(dim());
    flat.head(p) = theta;
    Eigen::Index at = p;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) flat(at++) = params.G(i, j);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < m; ++j) flat(at++) = params.G_in(i, j);
    for (Eigen::Index i = 0; i < p; ++i) flat(at++) = params.b(i);
    return flat;
}

void AugmentedLayout::unflatten(const Vec& flat, Vec* theta,
                                ReservoirParams* params,
                                const ReservoirParams& like) const {
    require_shape(flat.size() == dim(), "AugmentedLayout: flat dimension mismatch");
    if (theta) *theta = flat.head(p);
    if (params) {
        *params = like;
        params->G.resize(p, p);
        params->G_in.resize(p, m);
        params->b.resize(p);
        Eigen::Index at = p;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < p; ++j) params->G(i, j) = flat(at++);
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < m; ++j) params->G_in(i, j) = flat(at++);
        for (Eigen::Index i = 0; i < p; ++i) params->b(i) = flat(at++);
    }
}

Vec augmented_evolve(const Vec& aug, const Vec& u, const AugmentedLayout& layout,
                     const ReservoirParams& like) {
    Vec theta;
    ReservoirParams params;
    layout.unflatten(aug, &theta, &params, like);
    Vec out = aug;
    out.head(layout.p) = evolve(params, theta, u);
    return out;
}

namespace {

VecMap augmented_measurement(const std::vector<OptionSpec>& specs,
                             Eigen::Index p) {
    const VecMap price = pricing_measurement(specs);
    return [price, p](const Vec& aug) { return price(Vec(aug.head(p))); };
}

double augmented_validation_error(const Gaussian& belief_in,
                                  const AugmentedLayout& layout,
                                  const ReservoirParams& like,
                                  const SeriesData& validation,
                                  const OnlineConfig& cfg) {
    if (validation.size() == 0) return 0.0;
    Gaussian belief = belief_in;
    const Mat w_plus = [&] {
        Mat w = Mat::Zero(layout.dim(), layout.dim());
        w.topLeftCorner(layout.p, layout.p) = like.W;
        w.bottomRightCorner(layout.param_dim(), layout.param_dim()) =
            cfg.param_innovation_var *
            Mat::Identity(layout.param_dim(), layout.param_dim());
        return w;
    }();
    double total = 0.0;
    for (Eigen::Index t = 0; t < validation.size(); ++t) {
        const Vec& u = validation.inputs[t];
        const auto& batch = validation.observations[t];
        const VecMap evolve_map = [&layout, &like, u](const Vec& aug) {
            return augmented_evolve(aug, u, layout, like);
        };
        auto [prior, cross] = predict_through(belief, evolve_map, w_plus, cfg.ut);
        (void)cross;
        const Gaussian pred = unscented_transform(
            prior, augmented_measurement(batch.specs, layout.p), cfg.ut);
        total += relative_error_step(pred.mean(), batch.prices);
        belief = update_through(prior, augmented_measurement(batch.specs, layout.p),
                                batch.prices, like.v, cfg.ut)
                     .posterior;
    }
    return total / static_cast<double>(validation.size());
}

}  // namespace

OnlineResult online_fit(const SeriesData& data, const SplitSpec& split,
                        const ReservoirParams& init_params,
                        const OnlineConfig& cfg) {
    data.validate();
    split.validate(data.size());
    if (!(cfg.param_innovation_var >= 0.0))
        throw ConfigError("online_fit: param_innovation_var must be >= 0");
    const SeriesData train = data.slice(0, split.train);
    const SeriesData valid =
        data.slice(split.train, split.train + split.validation);

    AugmentedLayout layout{init_params.state_dim(), init_params.input_dim()};
    const Eigen::Index dim = layout.dim();

    Vec theta0 = Vec::Constant(layout.p, cfg.initial_state_mean);
    Gaussian belief0 = [&] {
        Mat cov = Mat::Zero(dim, dim);
        cov.topLeftCorner(layout.p, layout.p) =
            cfg.initial_state_var * Mat::Identity(layout.p, layout.p);
        cov.bottomRightCorner(layout.param_dim(), layout.param_dim()) =
            cfg.param_prior_var *
            Mat::Identity(layout.param_dim(), layout.param_dim());
        return Gaussian(layout.flatten(theta0, init_params), cov);
    }();

    Mat w_plus = Mat::Zero(dim, dim);
    w_plus.topLeftCorner(layout.p, layout.p) = init_params.W;
    w_plus.bottomRightCorner(layout.param_dim(), layout.param_dim()) =
        cfg.param_innovation_var *
        Mat::Identity(layout.param_dim(), layout.param_dim());

    OnlineResult result;
    result.layout = layout;
    double best_val = std::numeric_limits<double>::infinity();

    for (int pass = 0; pass < cfg.outer_iterations; ++pass) {
        std::vector<StepModel> steps;
        steps.reserve(train.inputs.size());
        for (Eigen::Index t = 0; t < train.size(); ++t) {
            StepModel step;
            const Vec u = train.inputs[t];
            step.evolve = [layout, like = init_params, u](const Vec& aug) {
                return augmented_evolve(aug, u, layout, like);
            };
            step.process_noise = w_plus;
            step.measure =
                augmented_measurement(train.observations[t].specs, layout.p);
            step.observation = train.observations[t].prices;
            step.obs_noise_var = init_params.v;
            steps.push_back(std::move(step));
        }

        FilterRun run;
        try {
            run = forward_filter_models(belief0, steps, cfg.ut);
        } catch (const NumericalError& err) {
            throw NumericalError(std::string("online_fit: sigma-point filtering "
                                             "failed: ") +
                                 err.what());
        }

        std::vector<double> radii;
        radii.reserve(run.states.size());
        for (const auto& state : run.states) {
            ReservoirParams mean_params;
            layout.unflatten(state.posterior.mean(), nullptr, &mean_params,
                             init_params);
            radii.push_back(spectral_radius(mean_params.G));
        }

        const SmoothedTrajectory smoothed = rts_smooth(run, cfg.ut);

        OnlinePassRecord rec;
        rec.validation_error = augmented_validation_error(
            run.states.back().posterior, layout, init_params, valid, cfg);
        rec.terminal_spectral_radius = radii.empty() ? 0.0 : radii.back();
        result.passes.push_back(rec);

        const bool improved =
            rec.validation_error <
            best_val * (1.0 - cfg.min_validation_improvement);
        if (pass == 0 || improved) {
            best_val = rec.validation_error;
            result.trajectory = smoothed.marginals;
            result.spectral_radii = radii;
            result.terminal_belief = run.states.back().posterior;
            layout.unflatten(result.terminal_belief.mean(), nullptr,
                             &result.final_params, init_params);
        }

        // Algorithm reset: restart the next pass from the smoothed time-0
        // belief.
        belief0 = smoothed.marginals.front();
        if (pass > 0 && !improved) break;
    }
    return result;
}

}  // namespace urs
