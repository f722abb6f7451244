#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace svp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double max_norm(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RankMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularSigma : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GapCollapse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientSamples : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace svp
