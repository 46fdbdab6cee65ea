#ifndef SURVBENCH_COMMON_HPP
#define SURVBENCH_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace survbench {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Missing cells are stored as quiet NaN; CSV empty fields map to it and back.
inline Scalar missing_value() { return std::numeric_limits<Scalar>::quiet_NaN(); }
inline bool is_missing(Scalar x) { return std::isnan(x); }

/// Data or precondition problem (bad file, bad value, schema mismatch). CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (non-convergence, singular system). Carries the last
/// iterate when a solver had one. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
  NumericalError(const std::string& what, Vector iterate)
      : std::runtime_error(what), last_iterate(std::move(iterate)) {}

  std::optional<Vector> last_iterate;
};

}  // namespace survbench

#endif
