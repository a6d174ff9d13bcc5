#include "urs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "urs/csv.hpp"

namespace urs {

namespace fs = std::filesystem;

namespace {

void write_json_file(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return Json::parse(in);
}

void write_resolved_config(const RunConfig& cfg, const std::string& command) {
    fs::create_directories(cfg.out_dir);
    Json j = run_config_to_json(cfg);
    j["command"] = command;
    write_json_file(cfg.out_dir + "/resolved_config.json", j);
}

double z_for_level(double level) { return inverse_normal_cdf(0.5 + 0.5 * level); }

/// Smoothed-trajectory CSV: per step the readout mean, central interval
/// and the per-option predicted prices at the smoothed belief.
void write_smoothed_csv(const std::string& path, const SmoothedTrajectory& traj,
                        const SeriesData& series, const UtConfig& ut,
                        double level) {
    Eigen::Index max_i = 0;
    for (const auto& obs : series.observations)
        max_i = std::max(max_i, obs.size());
    std::vector<std::string> header = {"t", "sigma_mean", "sigma_lo", "sigma_hi"};
    for (Eigen::Index i = 1; i <= max_i; ++i)
        header.push_back("pred_price_" + std::to_string(i));
    CsvWriter w(path, header);
    const double z = z_for_level(level);
    for (std::size_t t = 1; t < traj.marginals.size(); ++t) {
        const Gaussian& g = traj.marginals[t];
        const Gaussian sig = readout_gaussian(g);
        const double sd = std::sqrt(std::max(sig.cov()(0, 0), 0.0));
        std::vector<std::string> row = {
            CsvWriter::format(static_cast<Eigen::Index>(t)),
            CsvWriter::format(sig.mean()(0)),
            CsvWriter::format(sig.mean()(0) - z * sd),
            CsvWriter::format(sig.mean()(0) + z * sd)};
        const auto& specs = series.observations[t - 1].specs;
        const Gaussian prices =
            unscented_transform(g, pricing_measurement(specs), ut);
        for (Eigen::Index i = 0; i < max_i; ++i)
            row.push_back(i < prices.dim() ? CsvWriter::format(prices.mean()(i))
                                           : std::string{});
        w.row(row);
    }
}

void write_eval_outputs(const std::string& dir, const EvalResult& result) {
    {
        CsvWriter w(dir + "/results.csv", {"horizon", "mean_rel_error"});
        for (const auto& [k, err] : result.mean_rel_error)
            w.row({std::to_string(k), CsvWriter::format(err)});
    }
    {
        CsvWriter w(dir + "/coverage.csv", {"horizon", "nominal", "observed"});
        for (const auto& [k, observed] : result.coverage.observed)
            for (Eigen::Index li = 0; li < result.coverage.nominal.size(); ++li)
                w.row({std::to_string(k),
                       CsvWriter::format(result.coverage.nominal(li)),
                       CsvWriter::format(observed(li))});
    }
    {
        CsvWriter w(dir + "/forecasts.csv",
                    {"origin", "horizon", "rel_error", "sigma_mean", "sigma_sd",
                     "realized_sigma"});
        for (const auto& rec : result.records)
            w.row({CsvWriter::format(rec.origin), std::to_string(rec.horizon),
                   CsvWriter::format(rec.rel_error),
                   CsvWriter::format(rec.sigma_mean),
                   CsvWriter::format(std::sqrt(std::max(rec.sigma_var, 0.0))),
                   rec.realized_sigma ? CsvWriter::format(*rec.realized_sigma)
                                      : std::string{}});
    }
    Json summary;
    for (const auto& [k, err] : result.mean_rel_error)
        summary["mean_rel_error"][std::to_string(k)] = err;
    summary["coverage_against_sigma"] = result.coverage_against_sigma;
    write_json_file(dir + "/summary.json", summary);
}

}  // namespace

// ----------------------------------------------------------------------
// Config JSON round trip.

Json run_config_to_json(const RunConfig& c) {
    return Json{
        {"reservoir",
         {{"p", c.p},
          {"m", c.m},
          {"eta1", c.eta1},
          {"eta2", c.eta2},
          {"bias_policy", c.bias_policy},
          {"bias_mean", c.bias_mean},
          {"bias_var", c.bias_var},
          {"w_prior", c.w_prior},
          {"v_prior", c.v_prior},
          {"input_gain", c.input_gain}}},
        {"ut",
         {{"alpha", c.ut_alpha}, {"beta", c.ut_beta}, {"kappa", c.ut_kappa}}},
        {"gem",
         {{"lasso_alpha", c.lasso_alpha},
          {"term_ii_method", c.term_ii_method},
          {"max_iters", c.gem_max_iters},
          {"initial_state_mean", c.initial_state_mean},
          {"initial_state_var", c.initial_state_var}}},
        {"online",
         {{"p", c.online_p},
          {"param_innovation_var", c.param_innovation_var},
          {"param_prior_var", c.param_prior_var},
          {"passes", c.online_passes}}},
        {"data",
         {{"dataset_dir", c.dataset_dir},
          {"options_csv", c.options_csv},
          {"spot_csv", c.spot_csv},
          {"rates_csv", c.rates_csv},
          {"checkpoint", c.checkpoint},
          {"top_i", c.top_i}}},
        {"split",
         {{"validation_len", c.validation_len}, {"test_len", c.test_len}}},
        {"synthetic",
         {{"cir_v0", c.cir_v0},
          {"cir_mu", c.cir_mu},
          {"cir_theta", c.cir_theta},
          {"cir_sigma", c.cir_sigma},
          {"cir_n", c.cir_n},
          {"kappa_v", c.kappa_v},
          {"p0", c.p0},
          {"rate", c.rate},
          {"kappa_interpretation", c.kappa_interpretation},
          {"return_convention", c.return_convention},
          {"maturity_days_lo", c.maturity_days_lo},
          {"maturity_days_hi", c.maturity_days_hi},
          {"strike_lo", c.strike_lo},
          {"strike_hi", c.strike_hi},
          {"min_price_fraction", c.min_price_fraction}}},
        {"eval", {{"horizons", c.horizons}, {"study_seeds", c.study_seeds}}},
        {"run",
         {{"seed", c.seed},
          {"out_dir", c.out_dir},
          {"jobs", c.jobs},
          {"forecast_steps", c.forecast_steps}}}};
}

RunConfig run_config_from_json(const Json& j) {
    RunConfig c;
    auto get = [](const Json& section, const char* key, auto& field) {
        if (section.contains(key)) field = section.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("reservoir")) {
        const auto& s = j.at("reservoir");
        get(s, "p", c.p);
        get(s, "m", c.m);
        get(s, "eta1", c.eta1);
        get(s, "eta2", c.eta2);
        get(s, "bias_policy", c.bias_policy);
        get(s, "bias_mean", c.bias_mean);
        get(s, "bias_var", c.bias_var);
        get(s, "w_prior", c.w_prior);
        get(s, "v_prior", c.v_prior);
        get(s, "input_gain", c.input_gain);
    }
    if (j.contains("ut")) {
        const auto& s = j.at("ut");
        get(s, "alpha", c.ut_alpha);
        get(s, "beta", c.ut_beta);
        get(s, "kappa", c.ut_kappa);
    }
    if (j.contains("gem")) {
        const auto& s = j.at("gem");
        get(s, "lasso_alpha", c.lasso_alpha);
        get(s, "term_ii_method", c.term_ii_method);
        get(s, "max_iters", c.gem_max_iters);
        get(s, "initial_state_mean", c.initial_state_mean);
        get(s, "initial_state_var", c.initial_state_var);
    }
    if (j.contains("online")) {
        const auto& s = j.at("online");
        get(s, "p", c.online_p);
        get(s, "param_innovation_var", c.param_innovation_var);
        get(s, "param_prior_var", c.param_prior_var);
        get(s, "passes", c.online_passes);
    }
    if (j.contains("data")) {
        const auto& s = j.at("data");
        get(s, "dataset_dir", c.dataset_dir);
        get(s, "options_csv", c.options_csv);
        get(s, "spot_csv", c.spot_csv);
        get(s, "rates_csv", c.rates_csv);
        get(s, "checkpoint", c.checkpoint);
        get(s, "top_i", c.top_i);
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        get(s, "validation_len", c.validation_len);
        get(s, "test_len", c.test_len);
    }
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        get(s, "cir_v0", c.cir_v0);
        get(s, "cir_mu", c.cir_mu);
        get(s, "cir_theta", c.cir_theta);
        get(s, "cir_sigma", c.cir_sigma);
        get(s, "cir_n", c.cir_n);
        get(s, "kappa_v", c.kappa_v);
        get(s, "p0", c.p0);
        get(s, "rate", c.rate);
        get(s, "kappa_interpretation", c.kappa_interpretation);
        get(s, "return_convention", c.return_convention);
        get(s, "maturity_days_lo", c.maturity_days_lo);
        get(s, "maturity_days_hi", c.maturity_days_hi);
        get(s, "strike_lo", c.strike_lo);
        get(s, "strike_hi", c.strike_hi);
        get(s, "min_price_fraction", c.min_price_fraction);
    }
    if (j.contains("eval")) {
        const auto& s = j.at("eval");
        get(s, "horizons", c.horizons);
        get(s, "study_seeds", c.study_seeds);
    }
    if (j.contains("run")) {
        const auto& s = j.at("run");
        get(s, "seed", c.seed);
        get(s, "out_dir", c.out_dir);
        get(s, "jobs", c.jobs);
        get(s, "forecast_steps", c.forecast_steps);
    }
    return c;
}

std::vector<std::string> validate_run_config(const RunConfig& c,
                                             const std::string& command) {
    std::vector<std::string> bad;
    auto req = [&bad](bool ok, const std::string& what) {
        if (!ok) bad.push_back(what);
    };
    req(c.p >= 1, "reservoir.p must be >= 1");
    req(c.m >= 1, "reservoir.m must be >= 1");
    req(c.eta1 > 0.0 && c.eta1 < 1.0, "reservoir.eta1 must lie in (0,1)");
    req(c.eta2 > 0.0, "reservoir.eta2 must be positive");
    req(c.bias_policy == "constant" || c.bias_policy == "gaussian",
        "reservoir.bias_policy must be constant or gaussian");
    req(c.w_prior >= 0.0, "reservoir.w_prior must be >= 0");
    req(c.v_prior > 0.0, "reservoir.v_prior must be positive");
    req(c.ut_alpha > 0.0, "ut.alpha must be positive");
    req(c.lasso_alpha >= 0.0, "gem.lasso_alpha must be >= 0");
    req(c.term_ii_method == "joint_ut" || c.term_ii_method == "taylor",
        "gem.term_ii_method must be joint_ut or taylor");
    req(c.gem_max_iters >= 1, "gem.max_iters must be >= 1");
    req(c.initial_state_var > 0.0, "gem.initial_state_var must be positive");
    req(c.online_p >= 1, "online.p must be >= 1");
    req(c.param_innovation_var >= 0.0, "online.param_innovation_var must be >= 0");
    req(c.param_prior_var >= 0.0, "online.param_prior_var must be >= 0");
    req(c.online_passes >= 1, "online.passes must be >= 1");
    req(c.top_i >= 1, "data.top_i must be >= 1");
    req(c.validation_len >= 0, "split.validation_len must be >= 0");
    req(c.test_len >= 1, "split.test_len must be >= 1");
    req(c.cir_v0 > 0.0 && c.cir_mu > 0.0 && c.cir_theta > 0.0,
        "synthetic.cir parameters must be positive");
    req(c.cir_sigma >= 0.0, "synthetic.cir_sigma must be >= 0");
    req(c.cir_n >= 2, "synthetic.cir_n must be >= 2");
    req(c.kappa_v >= 0.0, "synthetic.kappa_v must be >= 0");
    req(c.p0 > 0.0, "synthetic.p0 must be positive");
    req(c.kappa_interpretation == "stdev" || c.kappa_interpretation == "variance",
        "synthetic.kappa_interpretation must be stdev or variance");
    req(c.return_convention == "stdev_is_vt" ||
            c.return_convention == "variance_is_vt",
        "synthetic.return_convention must be stdev_is_vt or variance_is_vt");
    req(c.maturity_days_lo >= 1 && c.maturity_days_hi >= c.maturity_days_lo,
        "synthetic.maturity range invalid");
    req(c.strike_lo > 0.0 && c.strike_hi >= c.strike_lo,
        "synthetic.strike range invalid");
    req(!c.horizons.empty(), "eval.horizons must be non-empty");
    for (int k : c.horizons)
        if (k < 1) {
            bad.push_back("eval.horizons entries must be >= 1");
            break;
        }
    req(c.jobs >= 1, "run.jobs must be >= 1");
    req(c.forecast_steps >= 1, "run.forecast_steps must be >= 1");
    req(!c.out_dir.empty(), "run.out_dir must be set");

    const bool has_dataset = !c.dataset_dir.empty();
    const bool has_market =
        !c.options_csv.empty() && !c.spot_csv.empty() && !c.rates_csv.empty();
    if (command == "train-offline" || command == "train-online" ||
        command == "forecast" ||
        (command == "evaluate" && c.study_seeds == 0)) {
        req(has_dataset || has_market,
            "data: need either data.dataset_dir or all of options_csv/spot_csv/rates_csv");
    }
    if (command == "forecast" || command == "evaluate")
        req(!c.checkpoint.empty(), "data.checkpoint must be set");
    return bad;
}

// ----------------------------------------------------------------------
// Config converters.

SyntheticConfig make_synthetic_config(const RunConfig& c) {
    SyntheticConfig s;
    s.cir.v0 = c.cir_v0;
    s.cir.long_term = c.cir_mu;
    s.cir.reversion = c.cir_theta;
    s.cir.vol_of_vol = c.cir_sigma;
    s.cir.n = c.cir_n;
    s.kappa_v = c.kappa_v;
    s.n_options = c.top_i;
    s.p0 = c.p0;
    s.rate = c.rate;
    s.noise_interpretation = c.kappa_interpretation == "variance"
                                 ? NoiseInterpretation::variance
                                 : NoiseInterpretation::stdev;
    s.return_convention = c.return_convention == "variance_is_vt"
                              ? ReturnConvention::variance_is_vt
                              : ReturnConvention::stdev_is_vt;
    s.quotes.maturity_days_lo = c.maturity_days_lo;
    s.quotes.maturity_days_hi = c.maturity_days_hi;
    s.quotes.strike_lo = c.strike_lo;
    s.quotes.strike_hi = c.strike_hi;
    s.quotes.min_price_fraction = c.min_price_fraction;
    s.seed = c.seed;
    return s;
}

InitConfig make_init_config(const RunConfig& c, Eigen::Index p_override) {
    InitConfig i;
    i.p = p_override > 0 ? p_override : c.p;
    i.m = c.m;
    i.eta1 = c.eta1;
    i.eta2 = c.eta2;
    i.bias_mean = c.bias_mean;
    i.bias_var = c.bias_var;
    i.bias_init = c.bias_policy == "gaussian" ? BiasInit::gaussian
                                              : BiasInit::constant;
    i.seed = c.seed + 1;  // distinct from the data-generation stream
    i.w_prior = c.w_prior;
    i.v_prior = c.v_prior;
    i.input_gain = c.input_gain;
    return i;
}

UtConfig make_ut_config(const RunConfig& c) {
    return UtConfig{c.ut_alpha, c.ut_beta, c.ut_kappa};
}

GemConfig make_gem_config(const RunConfig& c) {
    GemConfig g;
    g.lasso_alpha = c.lasso_alpha;
    g.term_ii_method = c.term_ii_method == "taylor" ? TermIiMethod::taylor
                                                    : TermIiMethod::joint_ut;
    g.max_iters = c.gem_max_iters;
    g.initial_state_mean = c.initial_state_mean;
    g.initial_state_var = c.initial_state_var;
    g.ut = make_ut_config(c);
    return g;
}

OnlineConfig make_online_config(const RunConfig& c) {
    OnlineConfig o;
    o.param_innovation_var = c.param_innovation_var;
    o.param_prior_var = c.param_prior_var;
    o.outer_iterations = c.online_passes;
    o.initial_state_mean = c.initial_state_mean;
    o.initial_state_var = c.initial_state_var;
    o.ut = make_ut_config(c);
    return o;
}

EvalConfig make_eval_config(const RunConfig& c) {
    EvalConfig e;
    e.horizons = c.horizons;
    e.validation_len = c.validation_len;
    e.ut = make_ut_config(c);
    return e;
}

LoadedSeries load_series(const RunConfig& c) {
    LoadedSeries out;
    if (!c.dataset_dir.empty()) {
        const SyntheticDataset ds = load_dataset(c.dataset_dir);
        out.series = ds.to_series(c.m);
        out.ground_truth = ds.series_ground_truth(c.m);
        return out;
    }
    if (c.options_csv.empty() || c.spot_csv.empty() || c.rates_csv.empty())
        throw ConfigError("load_series: no data source configured");
    const IngestResult ingested =
        ingest(MarketPaths{c.options_csv, c.spot_csv, c.rates_csv}, c.top_i, c.m);
    out.series = ingested.series;
    out.dates = ingested.dates;
    out.ingest_dropped_dates = ingested.dropped_dates;
    out.ingest_short_batches = ingested.short_batches;
    return out;
}

// ----------------------------------------------------------------------
// Commands.

void run_simulate(const RunConfig& cfg) {
    write_resolved_config(cfg, "simulate");
    const SyntheticDataset ds = generate_dataset(make_synthetic_config(cfg));
    save_dataset(ds, cfg.out_dir + "/dataset");
    export_market_csv(ds, cfg.out_dir + "/market_csv");
}

void run_train_offline(const RunConfig& cfg) {
    write_resolved_config(cfg, "train-offline");
    const LoadedSeries loaded = load_series(cfg);
    const Eigen::Index total = loaded.series.size();
    SplitSpec split;
    split.validation = cfg.validation_len;
    split.train = total - cfg.test_len - cfg.validation_len;
    split.validate(total);

    const ReservoirParams init = init_reservoir(make_init_config(cfg));
    const GemConfig gem_cfg = make_gem_config(cfg);
    auto [params, report] = gem_fit(loaded.series, split, init, gem_cfg);

    write_json_file(cfg.out_dir + "/checkpoint.json", reservoir_to_json(params));

    Json fit;
    fit["method"] =
        report.method == TermIiMethod::joint_ut ? "joint_ut" : "taylor";
    fit["aborted_non_finite"] = report.aborted_non_finite;
    fit["best_iteration"] = report.best_iteration;
    fit["best_validation_error"] = report.best_validation_error;
    for (const auto& it : report.iterations) {
        fit["iterations"].push_back(Json{{"regularized_loss", it.regularized_loss},
                                         {"smooth_loss", it.smooth_loss},
                                         {"validation_error", it.validation_error},
                                         {"step_size", it.step_size},
                                         {"accepted", it.accepted},
                                         {"g_l1", it.g_l1},
                                         {"g_in_l1", it.g_in_l1}}});
    }
    write_json_file(cfg.out_dir + "/fit_report.json", fit);

    // Smoothed trajectory of the training slice under the fitted params.
    const SeriesData train = loaded.series.slice(0, split.train);
    const Gaussian initial(
        Vec::Constant(cfg.p, gem_cfg.initial_state_mean),
        gem_cfg.initial_state_var * Mat::Identity(cfg.p, cfg.p));
    const FilterRun run = forward_filter(params, initial, train.inputs,
                                         train.observations, gem_cfg.ut);
    const SmoothedTrajectory traj = rts_smooth(run, gem_cfg.ut);
    write_smoothed_csv(cfg.out_dir + "/smoothed.csv", traj, train, gem_cfg.ut,
                       0.95);
}

void run_train_online(const RunConfig& cfg) {
    write_resolved_config(cfg, "train-online");
    LoadedSeries loaded = load_series(cfg);
    const Eigen::Index total = loaded.series.size();
    SplitSpec split;
    split.validation = cfg.validation_len;
    split.train = total - cfg.test_len - cfg.validation_len;
    split.validate(total);

    const ReservoirParams init =
        init_reservoir(make_init_config(cfg, cfg.online_p));
    const OnlineConfig online_cfg = make_online_config(cfg);
    const OnlineResult result =
        online_fit(loaded.series, split, init, online_cfg);

    write_json_file(cfg.out_dir + "/checkpoint.json",
                    reservoir_to_json(result.final_params));
    Json passes = Json::array();
    for (const auto& p : result.passes)
        passes.push_back(Json{{"validation_error", p.validation_error},
                              {"terminal_spectral_radius",
                               p.terminal_spectral_radius}});
    write_json_file(cfg.out_dir + "/fit_report.json", Json{{"passes", passes}});

    // Per-step readout mean/CI plus the spectral radius of the mean G.
    CsvWriter w(cfg.out_dir + "/online_trajectory.csv",
                {"t", "sigma_mean", "sigma_lo", "sigma_hi", "spectral_radius"});
    const double z = z_for_level(0.95);
    for (std::size_t t = 1; t < result.trajectory.size(); ++t) {
        const Gaussian& aug = result.trajectory[t];
        const Gaussian theta(
            aug.mean().head(result.layout.p),
            Mat(aug.cov().topLeftCorner(result.layout.p, result.layout.p)));
        const Gaussian sig = readout_gaussian(theta);
        const double sd = std::sqrt(std::max(sig.cov()(0, 0), 0.0));
        const double rho = (t - 1) < result.spectral_radii.size()
                               ? result.spectral_radii[t - 1]
                               : 0.0;
        w.row({CsvWriter::format(static_cast<Eigen::Index>(t)),
               CsvWriter::format(sig.mean()(0)),
               CsvWriter::format(sig.mean()(0) - z * sd),
               CsvWriter::format(sig.mean()(0) + z * sd),
               CsvWriter::format(rho)});
    }
}

void run_forecast(const RunConfig& cfg) {
    write_resolved_config(cfg, "forecast");
    const LoadedSeries loaded = load_series(cfg);
    const ReservoirParams params =
        reservoir_from_json(read_json_file(cfg.checkpoint));
    const UtConfig ut = make_ut_config(cfg);

    const Eigen::Index p = params.state_dim();
    const Gaussian initial(Vec::Constant(p, cfg.initial_state_mean),
                           cfg.initial_state_var * Mat::Identity(p, p));
    const FilterRun run = forward_filter(params, initial, loaded.series.inputs,
                                         loaded.series.observations, ut);
    Gaussian belief =
        run.states.empty() ? run.initial : run.states.back().posterior;

    // Future inputs default to zero returns; future specs reuse the last
    // observed batch rolled forward.
    const auto& last_specs = loaded.series.observations.back().specs;
    std::vector<Vec> future_inputs(static_cast<std::size_t>(cfg.forecast_steps),
                                   Vec::Zero(params.input_dim()));
    std::vector<std::vector<OptionSpec>> future_specs(
        static_cast<std::size_t>(cfg.forecast_steps), last_specs);
    const auto steps =
        k_step_predict(params, belief, future_inputs, future_specs, ut);

    std::vector<std::string> header = {"horizon", "sigma_mean", "sigma_lo",
                                       "sigma_hi"};
    for (std::size_t i = 1; i <= last_specs.size(); ++i) {
        header.push_back("price_mean_" + std::to_string(i));
        header.push_back("price_sd_" + std::to_string(i));
    }
    CsvWriter w(cfg.out_dir + "/forecast.csv", header);
    const double z = z_for_level(0.95);
    for (std::size_t h = 0; h < steps.size(); ++h) {
        const auto& step = steps[h];
        const double sd = std::sqrt(std::max(step.sigma.cov()(0, 0), 0.0));
        std::vector<std::string> row = {
            std::to_string(h + 1), CsvWriter::format(step.sigma.mean()(0)),
            CsvWriter::format(step.sigma.mean()(0) - z * sd),
            CsvWriter::format(step.sigma.mean()(0) + z * sd)};
        for (Eigen::Index i = 0; i < step.prices.dim(); ++i) {
            row.push_back(CsvWriter::format(step.prices.mean()(i)));
            row.push_back(CsvWriter::format(
                std::sqrt(std::max(step.prices.cov()(i, i), 0.0))));
        }
        w.row(row);
    }
}

void run_evaluate(const RunConfig& cfg) {
    write_resolved_config(cfg, "evaluate");
    if (cfg.study_seeds > 0) {
        std::vector<std::uint64_t> seeds;
        for (int s = 0; s < cfg.study_seeds; ++s)
            seeds.push_back(cfg.seed + static_cast<std::uint64_t>(s));
        const StudyOutcome outcome = run_synthetic_study(cfg, seeds);
        CsvWriter w(cfg.out_dir + "/study.csv",
                    {"horizon", "mean_rel_error", "coverage95"});
        for (const auto& [k, err] : outcome.mean_rel_error)
            w.row({std::to_string(k), CsvWriter::format(err),
                   CsvWriter::format(outcome.coverage95.at(k))});
        CsvWriter per_seed(cfg.out_dir + "/study_per_seed.csv",
                           {"seed", "horizon", "mean_rel_error", "coverage95"});
        for (const auto& seed_row : outcome.per_seed)
            for (const auto& [k, err] : seed_row.mean_rel_error)
                per_seed.row({std::to_string(seed_row.seed), std::to_string(k),
                              CsvWriter::format(err),
                              CsvWriter::format(seed_row.coverage95.at(k))});
        return;
    }

    const LoadedSeries loaded = load_series(cfg);
    const ReservoirParams params =
        reservoir_from_json(read_json_file(cfg.checkpoint));
    const EvalConfig eval_cfg = make_eval_config(cfg);
    const Eigen::Index p = params.state_dim();
    const Gaussian initial(Vec::Constant(p, cfg.initial_state_mean),
                           cfg.initial_state_var * Mat::Identity(p, p));
    const Eigen::Index train_len =
        loaded.series.size() - cfg.test_len - cfg.validation_len;
    const EvalResult result = rolling_k_step_eval(
        params, initial, loaded.series, train_len, eval_cfg,
        loaded.ground_truth ? &*loaded.ground_truth : nullptr);
    write_eval_outputs(cfg.out_dir, result);
}

// ----------------------------------------------------------------------
// Replicated synthetic study.

SeedOutcome run_synthetic_replication(const RunConfig& cfg, std::uint64_t seed) {
    RunConfig local = cfg;
    local.seed = seed;

    const SyntheticDataset ds = generate_dataset(make_synthetic_config(local));
    const SeriesData series = ds.to_series(local.m);
    const std::vector<double> truth = ds.series_ground_truth(local.m);

    SplitSpec split;
    split.validation = local.validation_len;
    split.train = series.size() - local.test_len - local.validation_len;
    split.validate(series.size());

    const ReservoirParams init = init_reservoir(make_init_config(local));
    const GemConfig gem_cfg = make_gem_config(local);
    auto [params, report] = gem_fit(series, split, init, gem_cfg);
    (void)report;

    const EvalConfig eval_cfg = make_eval_config(local);
    const Gaussian initial(
        Vec::Constant(local.p, gem_cfg.initial_state_mean),
        gem_cfg.initial_state_var * Mat::Identity(local.p, local.p));
    const EvalResult result = rolling_k_step_eval(params, initial, series,
                                                  split.train, eval_cfg, &truth);

    SeedOutcome out;
    out.seed = seed;
    out.mean_rel_error = result.mean_rel_error;
    // coverage at the 95% level: nearest grid point
    Eigen::Index idx95 = 0;
    double best = 1e9;
    for (Eigen::Index i = 0; i < result.coverage.nominal.size(); ++i) {
        const double d = std::abs(result.coverage.nominal(i) - 0.95);
        if (d < best) {
            best = d;
            idx95 = i;
        }
    }
    for (const auto& [k, observed] : result.coverage.observed)
        out.coverage95[k] = observed(idx95);
    return out;
}

StudyOutcome run_synthetic_study(const RunConfig& cfg,
                                 const std::vector<std::uint64_t>& seeds) {
    StudyOutcome outcome;
    outcome.per_seed.resize(seeds.size());

    const int jobs = std::max(1, cfg.jobs);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(seeds.size());
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            try {
                outcome.per_seed[i] = run_synthetic_replication(cfg, seeds[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        work();
    } else {
        for (int w = 0; w < jobs; ++w) workers.emplace_back(work);
        for (auto& t : workers) t.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    for (int k : cfg.horizons) {
        double err = 0.0, cov = 0.0;
        for (const auto& seed_row : outcome.per_seed) {
            err += seed_row.mean_rel_error.at(k);
            cov += seed_row.coverage95.at(k);
        }
        outcome.mean_rel_error[k] = err / static_cast<double>(seeds.size());
        outcome.coverage95[k] = cov / static_cast<double>(seeds.size());
    }
    return outcome;
}

}  // namespace urs
