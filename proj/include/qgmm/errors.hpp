#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgmm {

// Moment Jacobian (or another design matrix) lost column rank; carries the
// singular values that triggered the failure.
struct identification_error : std::runtime_error {
  std::vector<double> singular_values;
  explicit identification_error(const std::string& msg,
                                std::vector<double> sv = {})
      : std::runtime_error(msg), singular_values(std::move(sv)) {}
};

// Covariance matrix remained numerically singular after ridging.
struct conditioning_error : std::runtime_error {
  double smallest_eigenvalue;
  conditioning_error(const std::string& msg, double min_eig)
      : std::runtime_error(msg), smallest_eigenvalue(min_eig) {}
};

// Input blocks disagree on rows/columns; message names the offending block.
struct dimension_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Too many bootstrap draws or replications failed to estimate.
struct inference_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct harness_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qgmm
