#include "urs/market_data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "urs/csv.hpp"

namespace urs {

namespace {

using Days = std::chrono::sys_days;

Days parse_date(const std::string& iso, std::size_t csv_line) {
    int y = 0, mo = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream ss(iso);
    ss >> y >> dash1 >> mo >> dash2 >> d;
    const bool shape_ok = ss && dash1 == '-' && dash2 == '-';
    if (shape_ok) {
        const std::chrono::year_month_day ymd{
            std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
            std::chrono::day{static_cast<unsigned>(d)}};
        if (ymd.ok()) return Days{ymd};
    }
    std::ostringstream msg;
    msg << "ingest: line " << csv_line << ": invalid ISO date '" << iso << "'";
    throw DataError(msg.str());
}

std::string format_date(Days d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

struct QuoteRow {
    Days expiration;
    double strike, bid, offer, volume;
};

}  // namespace

IngestResult ingest(const MarketPaths& paths, Eigen::Index top_i,
                    Eigen::Index input_dim) {
    if (top_i < 1) throw ConfigError("ingest: top_i must be at least 1");
    if (input_dim < 1) throw ConfigError("ingest: input_dim must be at least 1");

    // Spot closes, ordered by date.
    const CsvTable spot_csv = read_csv(paths.spot_csv);
    const auto sp_date = spot_csv.column("date");
    const auto sp_close = spot_csv.column("close");
    std::map<Days, double> spot;
    for (std::size_t r = 0; r < spot_csv.rows.size(); ++r) {
        const double close = spot_csv.number(r, sp_close);
        if (!(close > 0.0)) {
            std::ostringstream msg;
            msg << "ingest: spot line " << r + 2 << ": non-positive close";
            throw DataError(msg.str());
        }
        spot[parse_date(spot_csv.cell(r, sp_date), r + 2)] = close;
    }
    if (spot.size() < static_cast<std::size_t>(input_dim) + 1)
        throw DataError("ingest: spot series shorter than the input window");

    std::vector<Days> spot_dates;
    std::vector<double> closes;
    for (const auto& [d, c] : spot) {
        spot_dates.push_back(d);
        closes.push_back(c);
    }
    std::vector<double> returns(closes.size(), 0.0);  // return at index i uses i-1 -> i
    for (std::size_t i = 1; i < closes.size(); ++i)
        returns[i] = (closes[i] - closes[i - 1]) / closes[i - 1];

    // Rates, forward-filled; percent quotes (median above 1) converted.
    const CsvTable rate_csv = read_csv(paths.rates_csv);
    const auto rt_date = rate_csv.column("date");
    const auto rt_rate = rate_csv.column("rate");
    std::map<Days, double> rates;
    std::vector<double> rate_values;
    for (std::size_t r = 0; r < rate_csv.rows.size(); ++r) {
        const double rate = rate_csv.number(r, rt_rate);
        rates[parse_date(rate_csv.cell(r, rt_date), r + 2)] = rate;
        rate_values.push_back(rate);
    }
    if (rates.empty()) throw DataError("ingest: rate table is empty");
    IngestResult result;
    std::nth_element(rate_values.begin(),
                     rate_values.begin() + rate_values.size() / 2,
                     rate_values.end());
    if (rate_values[rate_values.size() / 2] > 1.0) {
        result.rates_converted_from_percent = true;
        for (auto& [d, rate] : rates) rate /= 100.0;
    }
    auto rate_on = [&rates](Days d) -> const double* {
        auto it = rates.upper_bound(d);
        if (it == rates.begin()) return nullptr;
        return &std::prev(it)->second;
    };

    // Option quotes grouped by date.
    const CsvTable opt_csv = read_csv(paths.options_csv);
    const auto op_date = opt_csv.column("date");
    const auto op_exp = opt_csv.column("expiration");
    const auto op_strike = opt_csv.column("strike");
    const auto op_bid = opt_csv.column("best_bid");
    const auto op_offer = opt_csv.column("best_offer");
    const auto op_volume = opt_csv.column("volume");
    std::map<Days, std::vector<QuoteRow>> by_date;
    for (std::size_t r = 0; r < opt_csv.rows.size(); ++r) {
        const std::size_t line = r + 2;
        QuoteRow row;
        const Days date = parse_date(opt_csv.cell(r, op_date), line);
        row.expiration = parse_date(opt_csv.cell(r, op_exp), line);
        row.strike = opt_csv.number(r, op_strike);
        row.bid = opt_csv.number(r, op_bid);
        row.offer = opt_csv.number(r, op_offer);
        row.volume = opt_csv.number(r, op_volume);
        std::ostringstream msg;
        if (row.bid > row.offer) {
            msg << "ingest: line " << line << ": bid above offer";
            throw DataError(msg.str());
        }
        if (row.volume < 0.0) {
            msg << "ingest: line " << line << ": negative volume";
            throw DataError(msg.str());
        }
        if (!(row.strike > 0.0)) {
            msg << "ingest: line " << line << ": non-positive strike";
            throw DataError(msg.str());
        }
        if (row.expiration <= date) {
            ++result.dropped_rows;  // expired or same-day quote
            continue;
        }
        by_date[date].push_back(row);
    }

    // Assemble per-date batches where every component is available.
    for (std::size_t idx = 0; idx < spot_dates.size(); ++idx) {
        const Days date = spot_dates[idx];
        auto quotes_it = by_date.find(date);
        const double* rate = rate_on(date);
        const bool has_history = idx + 1 > static_cast<std::size_t>(input_dim);
        if (quotes_it == by_date.end() || rate == nullptr || !has_history) {
            if (quotes_it != by_date.end()) ++result.dropped_dates;
            continue;
        }

        auto rows = quotes_it->second;
        std::sort(rows.begin(), rows.end(), [](const QuoteRow& a, const QuoteRow& b) {
            if (a.volume != b.volume) return a.volume > b.volume;
            if (a.strike != b.strike) return a.strike < b.strike;
            return a.expiration < b.expiration;
        });
        if (static_cast<Eigen::Index>(rows.size()) > top_i)
            rows.resize(static_cast<std::size_t>(top_i));
        else if (static_cast<Eigen::Index>(rows.size()) < top_i)
            ++result.short_batches;

        ObservationBatch batch;
        Vec prices(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            OptionSpec spec;
            spec.spot = closes[idx];
            spec.rate = *rate;
            spec.strike = rows[i].strike;
            spec.maturity =
                static_cast<double>((rows[i].expiration - date).count()) / 365.0;
            batch.specs.push_back(spec);
            prices(static_cast<Eigen::Index>(i)) = 0.5 * (rows[i].bid + rows[i].offer);
        }
        batch.prices = prices;

        Vec u(input_dim);
        for (Eigen::Index j = 0; j < input_dim; ++j)
            u(j) = returns[idx - static_cast<std::size_t>(input_dim - 1 - j)];
        result.series.inputs.push_back(std::move(u));
        result.series.observations.push_back(std::move(batch));
        result.dates.push_back(format_date(date));
    }

    // Dates that had quotes but never made it into the series.
    result.dropped_dates +=
        static_cast<Eigen::Index>(by_date.size()) -
        static_cast<Eigen::Index>(result.dates.size()) - result.dropped_dates;
    if (result.dropped_dates < 0) result.dropped_dates = 0;
    return result;
}

void export_market_csv(const SyntheticDataset& ds, const std::string& dir,
                       const std::string& start_date) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const Days start = parse_date(start_date, 0);

    {
        CsvWriter w(dir + "/spot.csv", {"date", "close"});
        for (std::size_t t = 0; t < ds.prices.size(); ++t)
            w.row({format_date(start + std::chrono::days(static_cast<int>(t))),
                   CsvWriter::format(ds.prices[t])});
    }
    {
        CsvWriter w(dir + "/rates.csv", {"date", "rate"});
        for (std::size_t t = 0; t < ds.prices.size(); ++t)
            w.row({format_date(start + std::chrono::days(static_cast<int>(t))),
                   CsvWriter::format(ds.config.rate)});
    }
    {
        CsvWriter w(dir + "/options.csv",
                    {"date", "expiration", "strike", "best_bid", "best_offer",
                     "volume"});
        for (std::size_t t = 0; t < ds.quotes.size(); ++t) {
            const auto& batch = ds.quotes[t];
            const Days date = start + std::chrono::days(static_cast<int>(t + 1));
            for (Eigen::Index i = 0; i < batch.size(); ++i) {
                const int days =
                    static_cast<int>(std::lround(batch.specs[i].maturity * 365.0));
                // volumes descend so volume-ranked ingestion keeps order
                w.row({format_date(date), format_date(date + std::chrono::days(days)),
                       CsvWriter::format(batch.specs[i].strike),
                       CsvWriter::format(batch.prices(i)),
                       CsvWriter::format(batch.prices(i)),
                       CsvWriter::format(static_cast<Eigen::Index>(batch.size() - i))});
            }
        }
    }
}

}  // namespace urs
