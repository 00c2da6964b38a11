#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fddlab {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by fddlab.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent dimensions or invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or non-finite intermediate result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or version-mismatched artifact file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The model lacks a structure an operation needs (e.g. a transmit-side factor).
class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace fddlab
