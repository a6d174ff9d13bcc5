#ifndef URS_TYPES_HPP
#define URS_TYPES_HPP

#include <Eigen/Core>
#include <functional>
#include <stdexcept>
#include <string>

namespace urs {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Deterministic vector-to-vector map, the shape every evolution and
/// measurement function takes inside the filter and the transforms.
using VecMap = std::function<Vec(const Vec&)>;

/// Dimension or layout violations (caller bug).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A numerical procedure failed beyond its fallbacks (singular solve,
/// non-convergence, non-finite propagation).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A documented contract between modules was violated.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Malformed or inconsistent input data files.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

}  // namespace urs

#endif
