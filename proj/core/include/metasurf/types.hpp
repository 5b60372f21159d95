// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace metasurf {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Invalid configuration or input data. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A UE whose effective channel is identically zero; MRT and the max-min
/// objective are undefined for it.
class UnreachableUe : public std::runtime_error {
 public:
  explicit UnreachableUe(std::size_t ue)
      : std::runtime_error("UE " + std::to_string(ue) + " is unreachable (zero effective channel)"),
        ue_(ue) {}
  std::size_t ue() const noexcept { return ue_; }

 private:
  std::size_t ue_;
};

/// Numerical failure inside the optimization stack.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace metasurf
