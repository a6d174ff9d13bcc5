#include "urs/serialize.hpp"

namespace urs {

Json matrix_to_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const Json& j) {
    if (!j.is_array()) throw DataError("matrix_from_json: expected an array of rows");
    const auto n_rows = static_cast<Eigen::Index>(j.size());
    if (n_rows == 0) return Mat(0, 0);
    const auto n_cols = static_cast<Eigen::Index>(j.at(0).size());
    Mat m(n_rows, n_cols);
    for (Eigen::Index i = 0; i < n_rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != n_cols)
            throw DataError("matrix_from_json: ragged rows");
        for (Eigen::Index k = 0; k < n_cols; ++k)
            m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

Json vector_to_json(const Vec& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vec vector_from_json(const Json& j) {
    if (!j.is_array()) throw DataError("vector_from_json: expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

Json reservoir_to_json(const ReservoirParams& params) {
    return Json{{"G", matrix_to_json(params.G)},
                {"G_in", matrix_to_json(params.G_in)},
                {"b", vector_to_json(params.b)},
                {"W", matrix_to_json(params.W)},
                {"v", params.v},
                {"input_gain", params.input_gain},
                {"init_seed", params.init_seed}};
}

ReservoirParams reservoir_from_json(const Json& j) {
    ReservoirParams params;
    params.G = matrix_from_json(j.at("G"));
    params.G_in = matrix_from_json(j.at("G_in"));
    params.b = vector_from_json(j.at("b"));
    params.W = matrix_from_json(j.at("W"));
    params.v = j.at("v").get<double>();
    params.input_gain = j.value("input_gain", 1.0);
    params.init_seed = j.value("init_seed", std::uint64_t{0});
    if (params.G.rows() != params.G.cols() ||
        params.G.rows() != params.G_in.rows() ||
        params.b.size() != params.G.rows() ||
        params.W.rows() != params.G.rows() || params.W.rows() != params.W.cols())
        throw DataError("reservoir_from_json: inconsistent parameter shapes");
    return params;
}

}  // namespace urs
