#ifndef URS_RNG_HPP
#define URS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "urs/types.hpp"

namespace urs {

/// Seeded random stream with an explicit normal sampler (Marsaglia polar)
/// so draw sequences do not depend on the standard library's
/// implementation-defined normal_distribution.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() {
        return std::generate_canonical<double, 53>(engine_);
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on {lo, ..., hi} inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        // rejection sampling keeps the draw exactly uniform
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal draw.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        have_spare_ = true;
        return u * scale;
    }

    double normal(double mean, double stdev) { return mean + stdev * normal(); }

    Vec normal_vector(Eigen::Index n) {
        Vec out(n);
        for (Eigen::Index i = 0; i < n; ++i) out(i) = normal();
        return out;
    }

    Mat normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Mat out(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
        return out;
    }

    /// Derive an independent child stream (for per-seed sub-tasks).
    Rng spawn() { return Rng(engine_()); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace urs

#endif
