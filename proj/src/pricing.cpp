#include "urs/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace urs {

namespace {

constexpr double kVolLo = 1e-6;
constexpr double kVolHi = 5.0;

}  // namespace

void OptionSpec::validate() const {
    if (!(spot > 0.0)) throw DomainError("OptionSpec: spot must be positive");
    if (!(strike >= 0.0)) throw DomainError("OptionSpec: strike must be non-negative");
    if (!(maturity > 0.0)) throw DomainError("OptionSpec: maturity must be positive");
    if (!std::isfinite(rate)) throw DomainError("OptionSpec: rate must be finite");
}

void ObservationBatch::validate() const {
    if (specs.empty()) throw ShapeError("ObservationBatch: needs at least one option");
    require_shape(prices.size() == size(),
                  "ObservationBatch: price count does not match spec count");
    for (const auto& s : specs) s.validate();
    if ((prices.array() < 0.0).any())
        throw DomainError("ObservationBatch: negative observed price");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double bs_call_price(const OptionSpec& spec, double sigma) {
    spec.validate();
    if (!(sigma > 0.0))
        throw DomainError("bs_call_price: sigma must be positive");
    if (spec.strike == 0.0) return spec.spot;  // Phi terms saturate at 1

    const double sqrt_t = std::sqrt(spec.maturity);
    const double log_moneyness = std::log(spec.spot / spec.strike);
    const double d_plus =
        (log_moneyness + (spec.rate + 0.5 * sigma * sigma) * spec.maturity) /
        (sigma * sqrt_t);
    const double d_minus = d_plus - sigma * sqrt_t;
    return spec.spot * normal_cdf(d_plus) -
           normal_cdf(d_minus) * spec.strike * std::exp(-spec.rate * spec.maturity);
}

Vec batch_price(const std::vector<OptionSpec>& specs, double sigma) {
    Vec out(static_cast<Eigen::Index>(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = bs_call_price(specs[i], sigma);
    return out;
}

double bs_lower_bound(const OptionSpec& spec) {
    return std::max(0.0, spec.spot - spec.strike * std::exp(-spec.rate * spec.maturity));
}

double implied_vol(const OptionSpec& spec, double price) {
    spec.validate();
    const double lo_bound = bs_lower_bound(spec);
    if (!(price > lo_bound && price < spec.spot)) {
        std::ostringstream msg;
        msg << "implied_vol: price " << price
            << " outside open no-arbitrage interval (" << lo_bound << ", "
            << spec.spot << ")";
        throw DomainError(msg.str());
    }

    const double tol = 1e-10 * spec.spot;
    auto f = [&](double sigma) { return bs_call_price(spec, sigma) - price; };

    double a = kVolLo, b = kVolHi;
    double fa = f(a), fb = f(b);
    if (fa > 0.0 || fb < 0.0) {
        // price is inside the no-arbitrage band but outside the reachable
        // range of the volatility bracket
        throw NumericalError("implied_vol: no root inside volatility bracket [1e-6, 5]");
    }

    // Brent's method.
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < 200; ++iter) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * 1e-16 * std::abs(b) + 1e-15;
        const double xm = 0.5 * (c - b);
        if (std::abs(fb) <= tol || std::abs(xm) <= tol1) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw NumericalError("implied_vol: Brent iteration cap reached");
}

}  // namespace urs
