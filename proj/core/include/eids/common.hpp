#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace eids {

// Row-major so that a row of X is a contiguous instance.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV cells, labels, schemas, files).
class DataError : public Error {
 public:
  using Error::Error;
};

// Training or evaluation produced a non-finite or undefined quantity.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace eids
