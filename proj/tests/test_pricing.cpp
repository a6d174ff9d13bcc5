#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "urs/pricing.hpp"
#include "urs/rng.hpp"

using namespace urs;
using urs::testing::Welford;

TEST_CASE("zero strike makes the call worth the spot") {
    OptionSpec spec{100.0, 0.03, 0.0, 0.5};
    CHECK(bs_call_price(spec, 0.2) == doctest::Approx(100.0));
}

TEST_CASE("at-the-money price against a high-precision normal CDF") {
    OptionSpec spec{100.0, 0.0, 100.0, 1.0};
    // 100 * (Phi(0.1) - Phi(-0.1))
    const double want = 100.0 * (normal_cdf(0.1) - normal_cdf(-0.1));
    CHECK(want == doctest::Approx(7.9656).epsilon(1e-4));
    CHECK(bs_call_price(spec, 0.2) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("price within Monte Carlo error of a risk-neutral GBM oracle") {
    OptionSpec spec{2000.0, 0.02, 2000.0, 0.25};
    const double sigma = 0.15;
    const double exact = bs_call_price(spec, sigma);

    Rng rng(51);
    Welford acc;
    const double drift = (spec.rate - 0.5 * sigma * sigma) * spec.maturity;
    const double diffusion = sigma * std::sqrt(spec.maturity);
    const double discount = std::exp(-spec.rate * spec.maturity);
    for (int s = 0; s < 1'000'000; ++s) {
        const double terminal = spec.spot * std::exp(drift + diffusion * rng.normal());
        acc.add(discount * std::max(terminal - spec.strike, 0.0));
    }
    CHECK(std::abs(acc.mean() - exact) <= 3.0 * acc.standard_error());
}

TEST_CASE("invalid volatility is a domain error") {
    OptionSpec spec{100.0, 0.0, 100.0, 1.0};
    CHECK_THROWS_AS(bs_call_price(spec, 0.0), DomainError);
    CHECK_THROWS_AS(bs_call_price(spec, -0.1), DomainError);
}

TEST_CASE("batch pricing is elementwise and monotone in strike") {
    OptionSpec base{100.0, 0.02, 100.0, 0.5};
    SUBCASE("singleton equals the scalar price") {
        CHECK(batch_price({base}, 0.2)(0) ==
              doctest::Approx(bs_call_price(base, 0.2)));
    }
    SUBCASE("duplicates give duplicates") {
        const Vec prices = batch_price({base, base}, 0.2);
        CHECK(prices(0) == prices(1));
    }
    SUBCASE("strictly decreasing in strike") {
        std::vector<OptionSpec> specs;
        for (double k = 60.0; k <= 140.0; k += 5.0)
            specs.push_back({100.0, 0.02, k, 0.5});
        const Vec prices = batch_price(specs, 0.2);
        for (Eigen::Index i = 1; i < prices.size(); ++i)
            CHECK(prices(i) < prices(i - 1));
    }
}

TEST_CASE("no-arbitrage envelope holds") {
    Rng rng(52);
    for (int trial = 0; trial < 100; ++trial) {
        OptionSpec spec{100.0 * (0.5 + rng.uniform()), rng.uniform(0.0, 0.08),
                        100.0 * (0.4 + 1.2 * rng.uniform()),
                        rng.uniform(0.05, 2.0)};
        const double sigma = rng.uniform(0.05, 1.5);
        const double price = bs_call_price(spec, sigma);
        CHECK(price >= bs_lower_bound(spec) - 1e-12);
        CHECK(price <= spec.spot + 1e-12);
    }
}

TEST_CASE("vega is positive on a sigma grid") {
    OptionSpec spec{100.0, 0.02, 110.0, 0.75};
    for (double sigma = 0.05; sigma < 5.0; sigma += 0.25) {
        const double h = 1e-5;
        const double up = bs_call_price(spec, sigma + h);
        const double dn = bs_call_price(spec, sigma - h);
        CHECK(up - dn > 0.0);
    }
}

TEST_CASE("implied volatility round trip") {
    OptionSpec spec{100.0, 0.02, 100.0, 1.0};
    const double price = bs_call_price(spec, 0.15);
    CHECK(implied_vol(spec, price) == doctest::Approx(0.15).epsilon(1e-8));

    for (double sigma = 0.01; sigma <= 2.0; sigma += 0.07) {
        const double p = bs_call_price(spec, sigma);
        CHECK(implied_vol(spec, p) == doctest::Approx(sigma).epsilon(1e-8));
    }
}

TEST_CASE("implied volatility near the lower bound goes to zero") {
    OptionSpec spec{100.0, 0.02, 90.0, 0.5};
    const double bound = bs_lower_bound(spec);
    const double sigma = implied_vol(spec, bound + 1e-8 * spec.spot);
    CHECK(sigma < 1e-3);
}

TEST_CASE("recovered volatility is monotone in the forward price") {
    OptionSpec spec{100.0, 0.01, 105.0, 0.5};
    double prev = 0.0;
    for (double sigma = 0.1; sigma <= 1.0; sigma += 0.1) {
        const double price = bs_call_price(spec, sigma);
        const double recovered = implied_vol(spec, price);
        CHECK(recovered > prev);
        prev = recovered;
    }
}

TEST_CASE("prices outside the no-arbitrage band are rejected") {
    OptionSpec spec{100.0, 0.02, 100.0, 1.0};
    CHECK_THROWS_AS(implied_vol(spec, -1.0), DomainError);
    CHECK_THROWS_AS(implied_vol(spec, 100.1), DomainError);
    CHECK_THROWS_AS(implied_vol(spec, bs_lower_bound(spec)), DomainError);
}
