#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "support/oracles.hpp"
#include "urs/ssm.hpp"

using namespace urs;
using namespace urs::testing;

namespace {

StepModel affine_step(const LinearSystem& sys, const Vec& y) {
    StepModel step;
    step.evolve = [A = sys.A, c = sys.c](const Vec& x) { return Vec(A * x + c); };
    step.process_noise = sys.Q;
    step.measure = [H = sys.H, d = sys.d](const Vec& x) { return Vec(H * x + d); };
    step.observation = y;
    step.obs_noise_var = sys.v;
    return step;
}

}  // namespace

TEST_CASE("predict: deterministic propagation with zero noise") {
    ReservoirParams params;
    params.G = 0.5 * Mat::Identity(3, 3);
    params.G_in = Mat::Zero(3, 2);
    params.b = Vec::Constant(3, -1.0);
    params.W = Mat::Zero(3, 3);
    params.v = 1.0;

    Vec m(3);
    m << 0.2, 0.4, 0.6;
    const Gaussian posterior(m, Mat::Zero(3, 3));
    const Vec u = Vec::Zero(2);
    const auto [prior, cross] = predict(params, posterior, u, UtConfig{});
    CHECK((prior.mean() - evolve(params, m, u)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(prior.cov().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cross.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict: identity evolution hook gives prior = posterior + W") {
    Rng rng(61);
    const Mat a = rng.normal_matrix(3, 3);
    const Mat C = a * a.transpose() / 3.0 + 0.1 * Mat::Identity(3, 3);
    const Gaussian posterior(rng.normal_vector(3), C);
    const Mat W = 0.05 * Mat::Identity(3, 3);
    const auto [prior, cross] = predict_through(
        posterior, [](const Vec& x) { return x; }, W, UtConfig{});
    CHECK((prior.mean() - posterior.mean()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((prior.cov() - (C + W)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((cross - C).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("predict matches a Monte Carlo push-forward") {
    Rng rng(62);
    ReservoirParams params;
    params.G = 0.4 * rng.normal_matrix(3, 3);
    params.G_in = 0.8 * rng.normal_matrix(3, 2);
    params.b = Vec::Constant(3, -1.5);
    params.W = 0.01 * Mat::Identity(3, 3);
    params.v = 1.0;
    const Vec u = 0.05 * rng.normal_vector(2);

    const Mat a = rng.normal_matrix(3, 3);
    const Gaussian posterior(0.3 * Vec::Ones(3),
                             0.004 * (a * a.transpose() / 3.0 + Mat::Identity(3, 3)));

    const auto [prior, cross] = predict(params, posterior, u, UtConfig{});
    (void)cross;

    std::vector<Welford> mean_acc(3);
    for (int s = 0; s < 1'000'000; ++s) {
        const Vec theta = sample_gaussian(posterior, rng);
        const Vec next = evolve(params, theta, u);
        for (int i = 0; i < 3; ++i) mean_acc[i].add(next(i));
    }
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(prior.mean()(i) - mean_acc[i].mean()) <=
              3.0 * mean_acc[i].standard_error() + 1e-6);
}

TEST_CASE("update: enormous observation noise leaves the prior unchanged") {
    Rng rng(63);
    const Mat a = rng.normal_matrix(4, 4);
    const Gaussian prior(0.2 * Vec::Ones(4) + 0.01 * rng.normal_vector(4),
                         0.001 * (a * a.transpose() / 4.0 + Mat::Identity(4, 4)));
    ObservationBatch batch;
    batch.specs = {OptionSpec{100.0, 0.02, 100.0, 0.5},
                   OptionSpec{100.0, 0.02, 105.0, 0.5}};
    Vec y(2);
    y << 6.0, 4.0;
    batch.prices = y;

    const auto res = update(prior, batch, 1e12, UtConfig{});
    const double shift = (res.posterior.mean() - prior.mean()).norm() /
                         std::max(prior.mean().norm(), 1e-12);
    CHECK(shift < 1e-6);
}

TEST_CASE("update: affine measurement hook equals the exact Kalman update") {
    Rng rng(64);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index p = 3, n_obs = 2;
        const Mat a = rng.normal_matrix(p, p);
        const Gaussian prior(rng.normal_vector(p),
                             a * a.transpose() / 3.0 + 0.2 * Mat::Identity(p, p));
        const Mat H = rng.normal_matrix(n_obs, p);
        const Vec d = rng.normal_vector(n_obs);
        const double v = 0.3;
        const Vec y = rng.normal_vector(n_obs);

        const auto res = update_through(
            prior, [&](const Vec& x) { return Vec(H * x + d); }, y, v, UtConfig{});

        const Mat S = H * prior.cov() * H.transpose() + v * Mat::Identity(n_obs, n_obs);
        const Mat K = prior.cov() * H.transpose() * S.inverse();
        const Vec want_mean = prior.mean() + K * (y - H * prior.mean() - d);
        const Mat want_cov = prior.cov() - K * S * K.transpose();

        CHECK((res.posterior.mean() - want_mean).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((res.posterior.cov() - want_cov).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("update: posterior beats prior on synthetic batches") {
    Rng rng(65);
    ReservoirParams params;
    params.v = 0.25;
    int improved = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const Vec true_theta = Vec::Constant(4, 0.1 + 0.2 * rng.uniform());
        const Gaussian prior(Vec(true_theta + 0.05 * rng.normal_vector(4)),
                             0.003 * Mat::Identity(4, 4));

        ObservationBatch batch;
        const double sigma_true = true_theta.mean();
        Vec prices(5);
        for (int i = 0; i < 5; ++i) {
            OptionSpec spec{2000.0, 0.02, 2000.0 * (0.95 + 0.1 * rng.uniform()),
                            rng.uniform(0.2, 1.0)};
            batch.specs.push_back(spec);
            prices(i) = bs_call_price(spec, sigma_true) +
                        std::sqrt(params.v) * rng.normal();
        }
        batch.prices = prices;

        const auto res = update(prior, batch, params.v, UtConfig{});
        const double before = (prior.mean() - true_theta).norm();
        const double after = (res.posterior.mean() - true_theta).norm();
        if (after <= before) ++improved;
    }
    CHECK(improved >= static_cast<int>(0.95 * trials));
}

TEST_CASE("forward_filter handles an empty series") {
    ReservoirParams params;
    params.G = Mat::Identity(2, 2);
    params.G_in = Mat::Zero(2, 1);
    params.b = Vec::Zero(2);
    params.W = Mat::Identity(2, 2);
    params.v = 1.0;
    const Gaussian initial(Vec::Zero(2), Mat::Identity(2, 2));
    const FilterRun run = forward_filter(params, initial, {}, {}, UtConfig{});
    CHECK(run.states.empty());
    CHECK((run.initial.mean() - initial.mean()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frozen-state hook: posterior variance non-increasing") {
    // identity evolution, W = 0, repeated identical observations
    Rng rng(66);
    const Gaussian initial(Vec::Constant(2, 0.5), 0.1 * Mat::Identity(2, 2));
    const Mat H = Mat::Identity(2, 2);
    std::vector<StepModel> steps;
    for (int t = 0; t < 10; ++t) {
        StepModel step;
        step.evolve = [](const Vec& x) { return x; };
        step.process_noise = Mat::Zero(2, 2);
        step.measure = [H](const Vec& x) { return Vec(H * x); };
        step.observation = Vec::Constant(2, 0.48);
        step.obs_noise_var = 1e-4;
        steps.push_back(std::move(step));
    }
    const FilterRun run = forward_filter_models(initial, steps, UtConfig{});
    double prev = initial.cov().trace();
    for (const auto& state : run.states) {
        const double cur = state.posterior.cov().trace();
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("linear-Gaussian equivalence with the exact Kalman filter and RTS") {
    Rng rng(67);
    for (int trial = 0; trial < 3; ++trial) {
        const Eigen::Index p = 3, n_obs = 2, T = 50;
        const LinearSystem sys = random_linear_system(rng, p, n_obs);
        const Vec x0 = rng.normal_vector(p);
        const auto ys = simulate_linear(sys, x0, T, rng);

        const Vec m0 = Vec::Zero(p);
        const Mat C0 = Mat::Identity(p, p);
        const auto oracle_steps = kalman_filter(sys, m0, C0, ys);
        const auto oracle_smooth = rts_smooth_oracle(sys, m0, C0, oracle_steps);

        std::vector<StepModel> steps;
        for (const auto& y : ys) steps.push_back(affine_step(sys, y));
        const FilterRun run =
            forward_filter_models(Gaussian(m0, C0), steps, UtConfig{});

        double worst = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
            worst = std::max(worst, (run.states[t].posterior.mean() -
                                     oracle_steps[t].post_mean)
                                        .cwiseAbs()
                                        .maxCoeff());
            worst = std::max(worst, (run.states[t].posterior.cov() -
                                     oracle_steps[t].post_cov)
                                        .cwiseAbs()
                                        .maxCoeff());
            worst = std::max(worst, (run.states[t].prior.cov() -
                                     oracle_steps[t].prior_cov)
                                        .cwiseAbs()
                                        .maxCoeff());
            worst = std::max(worst,
                             (run.states[t].cross_prev - oracle_steps[t].cross_prev)
                                 .cwiseAbs()
                                 .maxCoeff());
        }
        CHECK(worst < 1e-8);

        double evidence_ours = 0.0, evidence_oracle = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) {
            evidence_ours += run.states[t].log_evidence_increment;
            evidence_oracle += oracle_steps[t].log_evidence;
        }
        CHECK(std::abs(evidence_ours - evidence_oracle) < 1e-6);

        const SmoothedTrajectory smooth = rts_smooth(run, UtConfig{});
        double worst_smooth = 0.0;
        for (Eigen::Index t = 0; t <= T; ++t) {
            worst_smooth = std::max(worst_smooth,
                                    (smooth.marginals[t].mean() -
                                     oracle_smooth.means[t])
                                        .cwiseAbs()
                                        .maxCoeff());
            worst_smooth = std::max(worst_smooth,
                                    (smooth.marginals[t].cov() -
                                     oracle_smooth.covs[t])
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        for (Eigen::Index t = 0; t < T; ++t)
            worst_smooth = std::max(
                worst_smooth,
                (smooth.cross[t] - oracle_smooth.cross[t]).cwiseAbs().maxCoeff());
        CHECK(worst_smooth < 1e-8);

        // smoothing does not inflate uncertainty on the linear hook
        for (Eigen::Index t = 0; t <= T; ++t) {
            const Mat filtered_cov =
                (t == 0) ? C0 : run.states[t - 1].posterior.cov();
            CHECK(smooth.marginals[t].cov().trace() <=
                  filtered_cov.trace() + 1e-10);
        }
    }
}

TEST_CASE("rts_smooth base case and terminal condition") {
    Rng rng(68);
    const LinearSystem sys = random_linear_system(rng, 2, 1);
    const auto ys = simulate_linear(sys, rng.normal_vector(2), 1, rng);
    std::vector<StepModel> steps{affine_step(sys, ys[0])};
    const Gaussian initial(Vec::Zero(2), Mat::Identity(2, 2));
    const FilterRun run = forward_filter_models(initial, steps, UtConfig{});
    const SmoothedTrajectory smooth = rts_smooth(run, UtConfig{});

    REQUIRE(smooth.marginals.size() == 2);
    CHECK((smooth.marginals[1].mean() - run.states[0].posterior.mean())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((smooth.marginals[1].cov() - run.states[0].posterior.cov())
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK_THROWS_AS(rts_smooth(FilterRun{}, UtConfig{}), ContractError);
}

TEST_CASE("k_step_predict composition and deterministic limit") {
    ReservoirParams params;
    params.G = 0.3 * Mat::Identity(2, 2);
    params.G_in = 0.5 * Mat::Ones(2, 1);
    params.b = Vec::Constant(2, -2.0);
    params.W = Mat::Zero(2, 2);
    params.v = 0.0;

    const Vec theta0 = Vec::Constant(2, 0.2);
    const Gaussian posterior(theta0, Mat::Zero(2, 2));
    std::vector<Vec> inputs{Vec::Constant(1, 0.01), Vec::Constant(1, -0.02)};
    std::vector<OptionSpec> specs{OptionSpec{100.0, 0.02, 100.0, 0.5}};
    std::vector<std::vector<OptionSpec>> all_specs{specs, specs};

    const auto steps = k_step_predict(params, posterior, inputs, all_specs,
                                      UtConfig{});
    REQUIRE(steps.size() == 2);

    // deterministic rollout oracle
    Vec theta = theta0;
    for (std::size_t j = 0; j < 2; ++j) {
        theta = evolve(params, theta, inputs[j]);
        const double sigma = readout(theta);
        const double price = bs_call_price(specs[0], sigma);
        CHECK(std::abs(steps[j].sigma.mean()(0) - sigma) < 1e-10);
        CHECK(std::abs(steps[j].prices.mean()(0) - price) < 1e-8);
        CHECK(steps[j].prices.cov()(0, 0) < 1e-12);
    }

    // k = 1 equals predict + measurement propagation
    const auto one = k_step_predict(params, posterior, {inputs[0]},
                                    {specs}, UtConfig{});
    const auto [prior, cross] = predict(params, posterior, inputs[0], UtConfig{});
    (void)cross;
    CHECK((one[0].state.mean() - prior.mean()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("k-step predictive variance grows with identity evolution") {
    const Gaussian posterior(Vec::Constant(2, 0.3), 0.01 * Mat::Identity(2, 2));
    const Mat W = 0.005 * Mat::Identity(2, 2);
    Gaussian belief = posterior;
    double prev_var = 0.0;
    for (int k = 1; k <= 5; ++k) {
        auto [prior, cross] = predict_through(
            belief, [](const Vec& x) { return x; }, W, UtConfig{});
        (void)cross;
        belief = prior;
        const double var = readout_gaussian(belief).cov()(0, 0);
        CHECK(var > prev_var);
        // closed form: (C + k W) averaged
        const Mat want = posterior.cov() + static_cast<double>(k) * W;
        CHECK(std::abs(var - want.sum() / 4.0) < 1e-9);
        prev_var = var;
    }
}
