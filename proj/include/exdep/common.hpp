#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exdep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Input outside the mathematical domain of an operation (negative data,
/// non-positive sample values, zero margins).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller supplied an invalid argument (sizes, levels, counts).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Estimation cannot proceed on this sample (e.g. no exceedances).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant failed beyond tolerance.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Worker configuration for the operations that parallelize internally.
/// Work is split into fixed-size chunks independent of `threads`, so results
/// do not depend on the number of workers.
struct Exec {
  unsigned threads = 1;
};

}  // namespace exdep
