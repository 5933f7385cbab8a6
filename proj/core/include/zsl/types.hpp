#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace zsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Dense class identifier in [0, C).
using ClassId = std::int32_t;
using ClassIds = std::vector<ClassId>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, tables, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid benchmark or generator configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training could not produce a usable model (divergence, singular systems).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace zsl
