#pragma once

// Max-linear models Y = A x_max Z with independent unit Frechet(alpha) factors.

#include "exdep/common.hpp"
#include "exdep/tpdm.hpp"

#include <cstdint>
#include <vector>

namespace exdep {

class MaxLinearModel {
 public:
  /// A is d x q, entrywise nonnegative, every column with a positive entry.
  MaxLinearModel(Matrix a, double alpha);

  const Matrix& coefficients() const { return a_; }
  double alpha() const { return alpha_; }
  Index dim() const { return a_.rows(); }
  Index factors() const { return a_.cols(); }

 private:
  Matrix a_;
  double alpha_;
};

/// Entrywise power; exponent 1 returns the input unchanged.
Matrix entrywise_power(const Matrix& m, double exponent);

/// Sigma = A_* A_*^T with A_* = A^(alpha/2).
TailMatrix tpdm_of_model(const MaxLinearModel& model);

struct AngularAtom {
  double mass;   ///< ||a_l||_alpha^alpha
  Vector atom;   ///< a_l / ||a_l||_alpha
};

/// One atom of the angular measure per column of A.
std::vector<AngularAtom> angular_atoms(const MaxLinearModel& model);

/// (sum_l a_jl^alpha)^(1/alpha) for each row j.
Vector marginal_scales(const MaxLinearModel& model);

/// n rows of A x_max Z with Z_l = (-log U)^(-1/alpha). Draw (row i, factor l)
/// depends only on (seed, i, l), so the output is independent of `exec`.
Matrix simulate(const MaxLinearModel& model, std::size_t n, std::uint64_t seed,
                const Exec& exec = {});

/// Rows [first, first + count) of the same stream as simulate().
Matrix simulate_rows(const MaxLinearModel& model, std::uint64_t first, std::size_t count,
                     std::uint64_t seed);

}  // namespace exdep
