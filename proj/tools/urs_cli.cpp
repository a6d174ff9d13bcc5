// urs: batch CLI over the unscented reservoir smoother library.
//
// Subcommands: simulate | train-offline | train-online | forecast | evaluate
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "urs/pipeline.hpp"

namespace {

using urs::Json;
using urs::RunConfig;

/// Pre-scan for --config so file values become the defaults that CLI
/// flags then override.
std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

std::string g_config_path_echo;  // bound so --config appears in help

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--config", g_config_path_echo,
                    "config file (parsed before flags)");
    cmd->add_option("--seed", cfg.seed, "top-level RNG seed");
    cmd->add_option("--out-dir", cfg.out_dir, "output directory");
    cmd->add_option("--jobs", cfg.jobs, "worker pool bound");

    cmd->add_option("--p", cfg.p, "reservoir dimension");
    cmd->add_option("--m", cfg.m, "input window length");
    cmd->add_option("--eta1", cfg.eta1, "evolution shrinkage");
    cmd->add_option("--eta2", cfg.eta2, "input shrinkage");
    cmd->add_option("--bias-policy", cfg.bias_policy, "constant | gaussian");
    cmd->add_option("--bias-mean", cfg.bias_mean, "bias mean / fill value");
    cmd->add_option("--bias-var", cfg.bias_var, "bias draw variance");
    cmd->add_option("--input-gain", cfg.input_gain, "squared-input gain");
    cmd->add_option("--ut-alpha", cfg.ut_alpha, "sigma point alpha");
    cmd->add_option("--ut-beta", cfg.ut_beta, "sigma point beta");
    cmd->add_option("--ut-kappa", cfg.ut_kappa, "sigma point kappa");
    cmd->add_option("--top-i", cfg.top_i, "options per date");
    cmd->add_option("--validation-len", cfg.validation_len, "validation steps");
    cmd->add_option("--test-len", cfg.test_len, "test steps");
}

void add_data_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--dataset-dir", cfg.dataset_dir, "synthetic dataset bundle");
    cmd->add_option("--options-csv", cfg.options_csv, "option quote table");
    cmd->add_option("--spot-csv", cfg.spot_csv, "spot price table");
    cmd->add_option("--rates-csv", cfg.rates_csv, "risk-free rate table");
}

void add_synthetic_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--cir-v0", cfg.cir_v0, "initial volatility");
    cmd->add_option("--cir-mu", cfg.cir_mu, "long-term volatility");
    cmd->add_option("--cir-theta", cfg.cir_theta, "mean-reversion speed");
    cmd->add_option("--cir-sigma", cfg.cir_sigma, "vol of vol");
    cmd->add_option("--cir-n", cfg.cir_n, "series length");
    cmd->add_option("--kappa-v", cfg.kappa_v, "deviated-volatility noise level");
    cmd->add_option("--kappa-interpretation", cfg.kappa_interpretation,
                    "stdev | variance");
    cmd->add_option("--return-convention", cfg.return_convention,
                    "stdev_is_vt | variance_is_vt");
    cmd->add_option("--p0", cfg.p0, "initial spot price");
    cmd->add_option("--rate", cfg.rate, "risk-free rate");
    cmd->add_option("--maturity-days-lo", cfg.maturity_days_lo);
    cmd->add_option("--maturity-days-hi", cfg.maturity_days_hi);
    cmd->add_option("--strike-lo", cfg.strike_lo);
    cmd->add_option("--strike-hi", cfg.strike_hi);
    cmd->add_option("--min-price-fraction", cfg.min_price_fraction);
}

int fail(const RunConfig& cfg, int code, const std::string& kind,
         const std::string& message) {
    const Json err{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << err.dump(2) << std::endl;
    std::error_code ignore;
    std::filesystem::create_directories(cfg.out_dir, ignore);
    if (!ignore) {
        std::ofstream out(cfg.out_dir + "/error.json");
        if (out) out << err.dump(2) << "\n";
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    const std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) {
        try {
            std::ifstream in(config_path);
            if (!in) throw urs::ConfigError("cannot open config file " + config_path);
            cfg = urs::run_config_from_json(Json::parse(in));
        } catch (const Json::exception& e) {
            return fail(cfg, 2, "config", std::string("config parse: ") + e.what());
        } catch (const std::exception& e) {
            return fail(cfg, 2, "config", e.what());
        }
    }

    CLI::App app{"unscented reservoir smoother"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic option dataset");
    add_common_options(simulate, cfg);
    add_synthetic_options(simulate, cfg);

    auto* offline = app.add_subcommand("train-offline", "offline generalized-EM training");
    add_common_options(offline, cfg);
    add_data_options(offline, cfg);
    offline->add_option("--lasso-alpha", cfg.lasso_alpha, "L1 coefficient");
    offline->add_option("--term-ii-method", cfg.term_ii_method, "joint_ut | taylor");
    offline->add_option("--gem-max-iters", cfg.gem_max_iters);
    offline->add_option("--initial-state-mean", cfg.initial_state_mean);
    offline->add_option("--initial-state-var", cfg.initial_state_var);

    auto* online = app.add_subcommand("train-online", "joint-UKF online training");
    add_common_options(online, cfg);
    add_data_options(online, cfg);
    online->add_option("--online-p", cfg.online_p, "online reservoir dimension");
    online->add_option("--param-innovation-var", cfg.param_innovation_var);
    online->add_option("--param-prior-var", cfg.param_prior_var);
    online->add_option("--online-passes", cfg.online_passes);

    auto* forecast = app.add_subcommand("forecast", "k-step prediction from a checkpoint");
    add_common_options(forecast, cfg);
    add_data_options(forecast, cfg);
    forecast->add_option("--checkpoint", cfg.checkpoint, "parameter checkpoint");
    forecast->add_option("--steps", cfg.forecast_steps, "horizons to emit");
    forecast->add_option("--initial-state-mean", cfg.initial_state_mean);
    forecast->add_option("--initial-state-var", cfg.initial_state_var);

    auto* evaluate = app.add_subcommand("evaluate", "rolling k-step testing protocol");
    add_common_options(evaluate, cfg);
    add_data_options(evaluate, cfg);
    add_synthetic_options(evaluate, cfg);
    evaluate->add_option("--checkpoint", cfg.checkpoint, "parameter checkpoint");
    evaluate->add_option("--horizons", cfg.horizons, "prediction horizons");
    evaluate->add_option("--study-seeds", cfg.study_seeds,
                         "replicate simulate+train+evaluate over this many seeds");
    evaluate->add_option("--lasso-alpha", cfg.lasso_alpha);
    evaluate->add_option("--gem-max-iters", cfg.gem_max_iters);
    evaluate->add_option("--initial-state-mean", cfg.initial_state_mean);
    evaluate->add_option("--initial-state-var", cfg.initial_state_var);

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    const auto violations = urs::validate_run_config(cfg, command);
    if (!violations.empty()) {
        std::string joined;
        for (const auto& v : violations) joined += v + "; ";
        return fail(cfg, 2, "config", joined);
    }

    try {
        if (command == "simulate") urs::run_simulate(cfg);
        else if (command == "train-offline") urs::run_train_offline(cfg);
        else if (command == "train-online") urs::run_train_online(cfg);
        else if (command == "forecast") urs::run_forecast(cfg);
        else if (command == "evaluate") urs::run_evaluate(cfg);
    } catch (const urs::ConfigError& e) {
        return fail(cfg, 2, "config", e.what());
    } catch (const urs::DataError& e) {
        return fail(cfg, 3, "data", e.what());
    } catch (const urs::NumericalError& e) {
        return fail(cfg, 4, "numerical", e.what());
    } catch (const Json::exception& e) {
        return fail(cfg, 3, "data", e.what());
    } catch (const std::exception& e) {
        return fail(cfg, 1, "internal", e.what());
    }
    return 0;
}
