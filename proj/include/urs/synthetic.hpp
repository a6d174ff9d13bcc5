#ifndef URS_SYNTHETIC_HPP
#define URS_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "urs/series.hpp"
#include "urs/types.hpp"

namespace urs {

/// Cox-Ingersoll-Ross settings. The volatility is carried in
/// standard-deviation units; dt is a trading-day year fraction.
struct CirConfig {
    double v0 = 0.15;
    double long_term = 0.15;   // mu
    double reversion = 10.0;   // mean-reversion speed
    double vol_of_vol = 0.04;  // sigma of the volatility process
    double dt = 1.0 / 252.0;
    Eigen::Index n = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

/// How the deviated-volatility noise level kappa_V is read. The
/// generation algorithm writes the noise as N(0, kappa_V); treating
/// kappa_V as the standard deviation reproduces the reported experiment
/// scale, the variance reading is kept selectable.
enum class NoiseInterpretation { stdev, variance };

/// Whether a return draw "N(0, V_t)" uses V_t as its standard deviation
/// (volatility is already in stdev units) or as its variance.
enum class ReturnConvention { stdev_is_vt, variance_is_vt };

/// Random maturity/strike ranges for the per-date quotes. Maturities are
/// integer calendar days (T = days/365); strikes are uniform around the
/// spot. Quotes priced below min_price_fraction * spot are redrawn so
/// the batch mimics liquid top-traded options.
struct QuoteSampling {
    int maturity_days_lo = 21;
    int maturity_days_hi = 252;
    double strike_lo = 0.90;
    double strike_hi = 1.10;
    double min_price_fraction = 0.02;
};

struct SyntheticConfig {
    CirConfig cir;
    double kappa_v = 0.01;
    Eigen::Index n_options = 5;  // I
    double p0 = 2000.0;
    double rate = 0.02;
    NoiseInterpretation noise_interpretation = NoiseInterpretation::stdev;
    ReturnConvention return_convention = ReturnConvention::stdev_is_vt;
    QuoteSampling quotes;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticDataset {
    std::vector<double> ground_truth;          // V_0..V_n
    Mat deviated;                              // n x I deviated volatilities
    std::vector<double> returns;               // u_1..u_n (scalars)
    std::vector<double> prices;                // p_0..p_n
    std::vector<ObservationBatch> quotes;      // per t = 1..n
    double noise_level = 0.0;
    SyntheticConfig config;

    /// Modeling series with lag-m return windows; usable steps start at
    /// t = m (the first step with a full input window).
    SeriesData to_series(Eigen::Index m) const;

    /// Ground-truth volatilities aligned with to_series(m) steps.
    std::vector<double> series_ground_truth(Eigen::Index m) const;

    /// First dataset time index included in to_series(m).
    Eigen::Index series_offset(Eigen::Index m) const { return m; }
};

/// Euler-Maruyama with full truncation; deterministic given the seed.
std::vector<double> simulate_cir(const CirConfig& cfg);

/// Full synthetic option dataset: ground-truth path, deviated
/// volatilities, returns, prices and per-date quote batches.
SyntheticDataset generate_dataset(const SyntheticConfig& cfg);

/// CSV bundle (ground_truth.csv, quotes.csv, series.csv) plus a JSON
/// manifest with the full configuration and seed.
void save_dataset(const SyntheticDataset& dataset, const std::string& dir);
SyntheticDataset load_dataset(const std::string& dir);

}  // namespace urs

#endif
