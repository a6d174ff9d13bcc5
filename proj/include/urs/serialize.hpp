#ifndef URS_SERIALIZE_HPP
#define URS_SERIALIZE_HPP

#include <json.hpp>

#include "urs/reservoir.hpp"
#include "urs/types.hpp"

namespace urs {

using Json = nlohmann::json;

/// Matrices serialize as row-major nested arrays.
Json matrix_to_json(const Mat& m);
Mat matrix_from_json(const Json& j);
Json vector_to_json(const Vec& v);
Vec vector_from_json(const Json& j);

/// Checkpoint document for the learnable parameter set; records the
/// originating RNG seed alongside the weights.
Json reservoir_to_json(const ReservoirParams& params);
ReservoirParams reservoir_from_json(const Json& j);

}  // namespace urs

#endif
