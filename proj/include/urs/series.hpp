#ifndef URS_SERIES_HPP
#define URS_SERIES_HPP

#include <vector>

#include "urs/pricing.hpp"
#include "urs/types.hpp"

namespace urs {

/// One modeling series: per-step input vectors u_t and the option quotes
/// observed at each step, aligned 1:1.
struct SeriesData {
    std::vector<Vec> inputs;
    std::vector<ObservationBatch> observations;

    Eigen::Index size() const { return static_cast<Eigen::Index>(inputs.size()); }

    void validate() const {
        require_shape(inputs.size() == observations.size(),
                      "SeriesData: inputs and observations must align");
        for (const auto& obs : observations) obs.validate();
    }

    /// Half-open slice [begin, end).
    SeriesData slice(Eigen::Index begin, Eigen::Index end) const {
        require_shape(begin >= 0 && begin <= end && end <= size(),
                      "SeriesData: slice out of range");
        SeriesData out;
        out.inputs.assign(inputs.begin() + begin, inputs.begin() + end);
        out.observations.assign(observations.begin() + begin,
                                observations.begin() + end);
        return out;
    }
};

/// Sequential train/validation/test split lengths over one series.
struct SplitSpec {
    Eigen::Index train = 0;
    Eigen::Index validation = 1;

    Eigen::Index test_begin() const { return train + validation; }

    void validate(Eigen::Index total) const {
        if (train < 1 || validation < 0 || train + validation > total)
            throw ConfigError("SplitSpec: split does not fit the series");
    }
};

}  // namespace urs

#endif
