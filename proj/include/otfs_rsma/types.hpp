// SPDX-License-Identifier: Apache-2.0
//
// Common numeric aliases and error types shared by every module.

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace otfs_rsma {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Shape of an operand does not match what the operation expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar parameter is outside its admissible range.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical precondition (Hermitian input, positive definiteness, ...)
/// was violated beyond tolerance.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Optimizer sub-solver failure. Carries the context in which it happened.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otfs_rsma
