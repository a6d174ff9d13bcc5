#include "urs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "urs/csv.hpp"
#include "urs/pricing.hpp"
#include "urs/rng.hpp"
#include "urs/serialize.hpp"

namespace urs {

namespace {

constexpr double kVolClampLo = 1e-4;
constexpr double kVolClampHi = 0.9999;

}  // namespace

void CirConfig::validate() const {
    if (!(v0 > 0.0 && long_term > 0.0 && reversion > 0.0 && vol_of_vol >= 0.0))
        throw ConfigError("CirConfig: parameters must be positive");
    if (!(dt > 0.0) || n < 1) throw ConfigError("CirConfig: invalid grid");
}

void SyntheticConfig::validate() const {
    cir.validate();
    if (!(kappa_v >= 0.0)) throw ConfigError("SyntheticConfig: kappa_v < 0");
    if (n_options < 1) throw ConfigError("SyntheticConfig: need I >= 1");
    if (!(p0 > 0.0)) throw ConfigError("SyntheticConfig: p0 must be positive");
    if (quotes.maturity_days_lo < 1 ||
        quotes.maturity_days_hi < quotes.maturity_days_lo)
        throw ConfigError("SyntheticConfig: bad maturity range");
    if (!(quotes.strike_lo > 0.0 && quotes.strike_hi >= quotes.strike_lo))
        throw ConfigError("SyntheticConfig: bad strike range");
}

std::vector<double> simulate_cir(const CirConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<double> path(cfg.n + 1);
    path[0] = cfg.v0;
    const double sqrt_dt = std::sqrt(cfg.dt);
    for (Eigen::Index k = 0; k < cfg.n; ++k) {
        const double v = path[k];
        const double drift = cfg.reversion * (cfg.long_term - v) * cfg.dt;
        const double diffusion =
            cfg.vol_of_vol * std::sqrt(std::max(v, 0.0)) * sqrt_dt * rng.normal();
        path[k + 1] = std::max(v + drift + diffusion, 0.0);
    }
    return path;
}

SyntheticDataset generate_dataset(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng master(cfg.seed);
    Rng cir_rng = master.spawn();
    Rng return_rng = master.spawn();
    Rng noise_rng = master.spawn();
    Rng quote_rng = master.spawn();

    SyntheticDataset ds;
    ds.config = cfg;
    ds.noise_level = cfg.kappa_v;

    CirConfig cir = cfg.cir;
    // the CIR stream is sub-seeded from the master seed
    {
        Rng probe = cir_rng;
        cir.seed = static_cast<std::uint64_t>(probe.uniform_int(0, INT64_MAX));
    }
    ds.ground_truth = simulate_cir(cir);
    const Eigen::Index n = cfg.cir.n;

    // Returns and the price path; a non-positive price redraws the step
    // once and otherwise aborts.
    ds.returns.resize(n);
    ds.prices.resize(n + 1);
    ds.prices[0] = cfg.p0;
    for (Eigen::Index t = 1; t <= n; ++t) {
        const double vt = ds.ground_truth[t];
        const double stdev =
            cfg.return_convention == ReturnConvention::stdev_is_vt
                ? vt
                : std::sqrt(std::max(vt, 0.0));
        double u = stdev * return_rng.normal();
        double price = ds.prices[t - 1] * (1.0 + u);
        if (price <= 0.0) {
            u = stdev * return_rng.normal();
            price = ds.prices[t - 1] * (1.0 + u);
            if (price <= 0.0)
                throw NumericalError("generate_dataset: price path went non-positive");
        }
        ds.returns[t - 1] = u;
        ds.prices[t] = price;
    }

    // Deviated volatilities and quote batches.
    const double noise_stdev =
        cfg.noise_interpretation == NoiseInterpretation::stdev
            ? cfg.kappa_v
            : std::sqrt(cfg.kappa_v);
    const Eigen::Index I = cfg.n_options;
    ds.deviated.resize(n, I);
    ds.quotes.resize(n);
    for (Eigen::Index t = 1; t <= n; ++t) {
        ObservationBatch batch;
        batch.specs.reserve(I);
        Vec prices(I);
        for (Eigen::Index i = 0; i < I; ++i) {
            const double vol_i = ds.ground_truth[t] + noise_stdev * noise_rng.normal();
            ds.deviated(t - 1, i) = vol_i;
            const double sigma = std::clamp(vol_i, kVolClampLo, kVolClampHi);

            OptionSpec spec;
            spec.spot = ds.prices[t];
            spec.rate = cfg.rate;
            double price = 0.0;
            for (int attempt = 0; attempt < 1000; ++attempt) {
                const int days = static_cast<int>(quote_rng.uniform_int(
                    cfg.quotes.maturity_days_lo, cfg.quotes.maturity_days_hi));
                spec.maturity = static_cast<double>(days) / 365.0;
                spec.strike =
                    quote_rng.uniform(cfg.quotes.strike_lo, cfg.quotes.strike_hi) *
                    ds.prices[t];
                price = bs_call_price(spec, sigma);
                if (price >= cfg.quotes.min_price_fraction * spec.spot) break;
            }
            batch.specs.push_back(spec);
            prices(i) = price;
        }
        batch.prices = prices;
        ds.quotes[t - 1] = std::move(batch);
    }
    return ds;
}

SeriesData SyntheticDataset::to_series(Eigen::Index m) const {
    require_shape(m >= 1, "to_series: input dimension must be positive");
    const auto n = static_cast<Eigen::Index>(returns.size());
    require_shape(m <= n, "to_series: input window longer than the series");
    SeriesData series;
    for (Eigen::Index t = m; t <= n; ++t) {
        Vec u(m);
        for (Eigen::Index j = 0; j < m; ++j) u(j) = returns[t - m + j];
        series.inputs.push_back(std::move(u));
        series.observations.push_back(quotes[t - 1]);
    }
    return series;
}

std::vector<double> SyntheticDataset::series_ground_truth(Eigen::Index m) const {
    const auto n = static_cast<Eigen::Index>(returns.size());
    std::vector<double> out;
    for (Eigen::Index t = m; t <= n; ++t)
        out.push_back(ground_truth[static_cast<std::size_t>(t)]);
    return out;
}

namespace {

Json sampling_to_json(const QuoteSampling& q) {
    return Json{{"maturity_days_lo", q.maturity_days_lo},
                {"maturity_days_hi", q.maturity_days_hi},
                {"strike_lo", q.strike_lo},
                {"strike_hi", q.strike_hi},
                {"min_price_fraction", q.min_price_fraction}};
}

QuoteSampling sampling_from_json(const Json& j) {
    QuoteSampling q;
    q.maturity_days_lo = j.at("maturity_days_lo").get<int>();
    q.maturity_days_hi = j.at("maturity_days_hi").get<int>();
    q.strike_lo = j.at("strike_lo").get<double>();
    q.strike_hi = j.at("strike_hi").get<double>();
    q.min_price_fraction = j.at("min_price_fraction").get<double>();
    return q;
}

}  // namespace

void save_dataset(const SyntheticDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        CsvWriter w(dir + "/ground_truth.csv", {"t", "volatility"});
        for (std::size_t t = 0; t < ds.ground_truth.size(); ++t)
            w.row({CsvWriter::format(static_cast<Eigen::Index>(t)),
                   CsvWriter::format(ds.ground_truth[t])});
    }
    {
        CsvWriter w(dir + "/series.csv", {"t", "price", "return"});
        w.row({"0", CsvWriter::format(ds.prices[0]), "0"});
        for (std::size_t t = 1; t < ds.prices.size(); ++t)
            w.row({CsvWriter::format(static_cast<Eigen::Index>(t)),
                   CsvWriter::format(ds.prices[t]),
                   CsvWriter::format(ds.returns[t - 1])});
    }
    {
        CsvWriter w(dir + "/quotes.csv", {"t", "i", "strike", "maturity", "price"});
        for (std::size_t t = 0; t < ds.quotes.size(); ++t) {
            const auto& batch = ds.quotes[t];
            for (Eigen::Index i = 0; i < batch.size(); ++i)
                w.row({CsvWriter::format(static_cast<Eigen::Index>(t + 1)),
                       CsvWriter::format(i),
                       CsvWriter::format(batch.specs[i].strike),
                       CsvWriter::format(batch.specs[i].maturity),
                       CsvWriter::format(batch.prices(i))});
        }
    }

    Json manifest{
        {"cir",
         {{"v0", ds.config.cir.v0},
          {"long_term", ds.config.cir.long_term},
          {"reversion", ds.config.cir.reversion},
          {"vol_of_vol", ds.config.cir.vol_of_vol},
          {"dt", ds.config.cir.dt},
          {"n", ds.config.cir.n},
          {"seed", ds.config.cir.seed}}},
        {"kappa_v", ds.config.kappa_v},
        {"n_options", ds.config.n_options},
        {"p0", ds.config.p0},
        {"rate", ds.config.rate},
        {"noise_interpretation",
         ds.config.noise_interpretation == NoiseInterpretation::stdev
             ? "stdev"
             : "variance"},
        {"return_convention",
         ds.config.return_convention == ReturnConvention::stdev_is_vt
             ? "stdev_is_vt"
             : "variance_is_vt"},
        {"quote_sampling", sampling_to_json(ds.config.quotes)},
        {"seed", ds.config.seed},
        {"noise_level", ds.noise_level}};
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw DataError("save_dataset: cannot write manifest");
    out << manifest.dump(2) << "\n";
}

SyntheticDataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw DataError("load_dataset: missing manifest.json in " + dir);
    Json manifest = Json::parse(in);

    SyntheticDataset ds;
    auto& cfg = ds.config;
    const Json& cir = manifest.at("cir");
    cfg.cir.v0 = cir.at("v0").get<double>();
    cfg.cir.long_term = cir.at("long_term").get<double>();
    cfg.cir.reversion = cir.at("reversion").get<double>();
    cfg.cir.vol_of_vol = cir.at("vol_of_vol").get<double>();
    cfg.cir.dt = cir.at("dt").get<double>();
    cfg.cir.n = cir.at("n").get<Eigen::Index>();
    cfg.cir.seed = cir.at("seed").get<std::uint64_t>();
    cfg.kappa_v = manifest.at("kappa_v").get<double>();
    cfg.n_options = manifest.at("n_options").get<Eigen::Index>();
    cfg.p0 = manifest.at("p0").get<double>();
    cfg.rate = manifest.at("rate").get<double>();
    cfg.noise_interpretation =
        manifest.at("noise_interpretation").get<std::string>() == "stdev"
            ? NoiseInterpretation::stdev
            : NoiseInterpretation::variance;
    cfg.return_convention =
        manifest.at("return_convention").get<std::string>() == "stdev_is_vt"
            ? ReturnConvention::stdev_is_vt
            : ReturnConvention::variance_is_vt;
    cfg.quotes = sampling_from_json(manifest.at("quote_sampling"));
    cfg.seed = manifest.at("seed").get<std::uint64_t>();
    ds.noise_level = manifest.at("noise_level").get<double>();

    const CsvTable gt = read_csv(dir + "/ground_truth.csv");
    const auto gt_v = gt.column("volatility");
    for (std::size_t r = 0; r < gt.rows.size(); ++r)
        ds.ground_truth.push_back(gt.number(r, gt_v));

    const CsvTable series = read_csv(dir + "/series.csv");
    const auto s_price = series.column("price");
    const auto s_ret = series.column("return");
    for (std::size_t r = 0; r < series.rows.size(); ++r) {
        ds.prices.push_back(series.number(r, s_price));
        if (r > 0) ds.returns.push_back(series.number(r, s_ret));
    }

    const CsvTable quotes = read_csv(dir + "/quotes.csv");
    const auto q_t = quotes.column("t");
    const auto q_strike = quotes.column("strike");
    const auto q_mat = quotes.column("maturity");
    const auto q_price = quotes.column("price");
    const Eigen::Index n = cfg.cir.n;
    ds.quotes.resize(n);
    std::vector<std::vector<double>> price_acc(n);
    for (std::size_t r = 0; r < quotes.rows.size(); ++r) {
        const auto t = static_cast<Eigen::Index>(quotes.number(r, q_t));
        if (t < 1 || t > n) throw DataError("load_dataset: quote row out of range");
        OptionSpec spec;
        spec.spot = ds.prices.at(static_cast<std::size_t>(t));
        spec.rate = cfg.rate;
        spec.strike = quotes.number(r, q_strike);
        spec.maturity = quotes.number(r, q_mat);
        ds.quotes[t - 1].specs.push_back(spec);
        price_acc[t - 1].push_back(quotes.number(r, q_price));
    }
    for (Eigen::Index t = 0; t < n; ++t) {
        Vec prices(static_cast<Eigen::Index>(price_acc[t].size()));
        for (Eigen::Index i = 0; i < prices.size(); ++i)
            prices(i) = price_acc[t][static_cast<std::size_t>(i)];
        ds.quotes[t].prices = prices;
    }
    ds.deviated.resize(0, 0);  // not persisted; regenerable from the seed
    return ds;
}

}  // namespace urs
