#ifndef URS_PRICING_HPP
#define URS_PRICING_HPP

#include <vector>

#include "urs/types.hpp"

namespace urs {

/// Exogenous configuration of one call-option measurement: spot price,
/// annualized risk-free rate, strike and maturity in calendar years
/// (days / 365).
struct OptionSpec {
    double spot = 0.0;
    double rate = 0.0;
    double strike = 0.0;
    double maturity = 0.0;

    void validate() const;
};

/// The option quotes observed on one date: I specs and their prices.
struct ObservationBatch {
    std::vector<OptionSpec> specs;
    Vec prices;

    Eigen::Index size() const { return static_cast<Eigen::Index>(specs.size()); }
    void validate() const;
};

/// Standard normal CDF via the complementary error function.
double normal_cdf(double x);

/// Black-Scholes call price for volatility sigma (standard-deviation
/// representation; sigma^2 appears only inside d+/d-). Requires sigma > 0.
double bs_call_price(const OptionSpec& spec, double sigma);

/// Elementwise bs_call_price over a batch of specs.
Vec batch_price(const std::vector<OptionSpec>& specs, double sigma);

/// Lower/upper no-arbitrage bounds: [max(0, p - K e^{-rT}), p].
double bs_lower_bound(const OptionSpec& spec);

/// Volatility sigma with bs_call_price(spec, sigma) = price, by bracketed
/// Brent search on [1e-6, 5]. The price must lie strictly inside the
/// no-arbitrage interval.
double implied_vol(const OptionSpec& spec, double price);

}  // namespace urs

#endif
