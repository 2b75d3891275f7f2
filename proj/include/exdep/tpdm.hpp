#pragma once

// Tail pairwise dependence matrices: the TailMatrix value type, validation,
// polar decomposition of a sample under the L_alpha norm, and the
// exceedance-based estimators of the angular mass and the TPDM.

#include "exdep/common.hpp"

#include <cstddef>
#include <vector>

namespace exdep {

struct TpdmValidation {
  double symmetry_defect = 0.0;  ///< max |s_jk - s_kj|
  double min_entry = 0.0;
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  double psd_tolerance = 0.0;
  bool symmetric = true;
  bool nonnegative = true;
  bool psd = true;
  bool valid() const { return symmetric && nonnegative && psd; }
};

struct ValidationTolerances {
  double symmetry = 1e-12;   ///< relative to the largest entry
  double psd = 1e-10;        ///< relative to the trace
};

/// Reports symmetry defect, most negative entry and smallest eigenvalue.
TpdmValidation validate_tpdm(const Matrix& sigma, const ValidationTolerances& tol = {});

/// A symmetric, entrywise nonnegative d x d matrix together with its tail
/// index. Construction rejects non-square, asymmetric, negative or
/// non-finite input; positive semi-definiteness is reported by validate_tpdm
/// since estimated matrices may violate it through sampling noise.
class TailMatrix {
 public:
  TailMatrix(Matrix sigma, double alpha);

  const Matrix& sigma() const { return sigma_; }
  double alpha() const { return alpha_; }
  Index dim() const { return sigma_.rows(); }
  double operator()(Index j, Index k) const { return sigma_(j, k); }
  /// Total angular mass m = trace.
  double mass() const { return sigma_.trace(); }

 private:
  Matrix sigma_;
  double alpha_;
};

/// ||x||_alpha = (sum_j x_j^alpha)^(1/alpha), scaled to avoid overflow.
double lalpha_norm(const Eigen::Ref<const Vector>& x, double alpha);

struct PolarSample {
  Vector radii;       ///< R_i, one per retained row
  Matrix angles;      ///< W_i as rows, ||W_i||_alpha = 1
  double alpha = 2.0;
  std::size_t dropped_zero_rows = 0;
  std::size_t input_rows = 0;  ///< n, including dropped all-zero rows
};

/// R_i = ||X_i||_alpha, W_i = X_i / R_i. All-zero rows are dropped and counted.
PolarSample polar_transform(const Matrix& data, double alpha);

struct MassEstimate {
  double m_hat = 0.0;
  double r0 = 0.0;
  std::size_t n_exc = 0;
  std::size_t n = 0;
  double quantile_level = 0.95;
  double alpha = 2.0;
};

/// r0 = R_(ceil(level * n)), n_exc = #{R_i > r0}, m_hat = r0^alpha n_exc / n.
MassEstimate estimate_mass(const PolarSample& polar, double quantile_level);

struct TpdmEstimate {
  TailMatrix matrix;
  TpdmValidation validation;
  /// True when the PSD check failed beyond tolerance (sampling noise).
  bool psd_warning = false;
};

/// sigma_jk = (r0^alpha / n) sum_{R_i > r0} W_ij^(alpha/2) W_ik^(alpha/2).
TpdmEstimate estimate_tpdm(const PolarSample& polar, const MassEstimate& mass,
                           const Exec& exec = {});

/// d x n_exc matrix with columns (m_hat/n_exc)^(1/2) W_i^(alpha/2) over the
/// exceedances, in row order; reproduces the estimated TPDM as B B^T.
Matrix empirical_factor(const PolarSample& polar, const MassEstimate& mass);

struct MassStabilityRow {
  double level;
  double r0;
  std::size_t n_exc;
  double m_hat;
};

/// (level, m_hat) table for choosing r0; levels where no radius exceeds the
/// quantile are omitted.
std::vector<MassStabilityRow> mass_stability_table(const PolarSample& polar,
                                                   double first = 0.80, double last = 0.995,
                                                   double step = 0.005);

}  // namespace exdep
