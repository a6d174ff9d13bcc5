#ifndef URS_MARKET_DATA_HPP
#define URS_MARKET_DATA_HPP

#include <string>
#include <vector>

#include "urs/series.hpp"
#include "urs/synthetic.hpp"
#include "urs/types.hpp"

namespace urs {

/// Input file locations for one market dataset: option quotes
/// (date, expiration, strike, best_bid, best_offer, volume), spot closes
/// (date, close) and annualized rates (date, rate).
struct MarketPaths {
    std::string options_csv;
    std::string spot_csv;
    std::string rates_csv;
};

struct IngestResult {
    SeriesData series;
    std::vector<std::string> dates;  // ISO date per series step
    Eigen::Index dropped_dates = 0;      // missing spot/rate/history/quotes
    Eigen::Index short_batches = 0;      // dates with fewer than I options
    Eigen::Index dropped_rows = 0;       // expired or same-day quotes
    bool rates_converted_from_percent = false;
};

/// Build per-date observation batches (top I quotes by traded volume,
/// mid prices, calendar-year maturities) and lag-m return windows from
/// the spot series. Dates missing any component are dropped and counted.
IngestResult ingest(const MarketPaths& paths, Eigen::Index top_i,
                    Eigen::Index input_dim);

/// Write a synthetic dataset in the market CSV schema (fixtures for the
/// real-data pipeline). Dataset step t maps to start_date + t days.
void export_market_csv(const SyntheticDataset& dataset, const std::string& dir,
                       const std::string& start_date = "2018-01-01");

}  // namespace urs

#endif
