#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace ratesmooth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Bad inputs: malformed files, inconsistent grids, invalid configuration.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: non-convergence, indefinite systems, degenerate scales.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ratesmooth
