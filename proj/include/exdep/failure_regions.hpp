#pragma once

// Exponent measures of extreme failure regions for max-linear models, threshold
// calibration, and Monte Carlo / empirical exceedance estimates.

#include "exdep/common.hpp"
#include "exdep/max_linear.hpp"
#include "exdep/tpdm.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace exdep {

enum class RegionKind { Max, Min, Sum, MinOfSums, MaxOfSums, Generic };

std::string to_string(RegionKind kind);
RegionKind region_kind_from_string(const std::string& name);

using Functional = std::function<double(const Vector&)>;
using Groups = std::vector<std::vector<Index>>;

/// {y : f(y) > x} for the family's functional f. Max and Min carry a
/// threshold vector, the other families a scalar.
struct FailureRegion {
  RegionKind kind = RegionKind::Max;
  Vector x;                 ///< Max, Min
  double threshold = 1.0;   ///< Sum, MinOfSums, MaxOfSums, Generic
  Vector v;                 ///< Sum families
  Groups groups;            ///< MinOfSums, MaxOfSums
  Functional f;             ///< Generic
  double degree = 1.0;      ///< Generic: f(t y) = t^degree f(y); <= 0 if unknown
  std::string label;

  static FailureRegion max(Vector x);
  static FailureRegion min(Vector x);
  static FailureRegion sum(Vector v, double x);
  static FailureRegion min_of_sums(Vector v, Groups groups, double x);
  static FailureRegion max_of_sums(Vector v, Groups groups, double x);
  static FailureRegion generic(Functional f, double x, double degree = 1.0,
                               std::string label = "f");

  /// Same shape at scale t: thresholds multiplied by t.
  FailureRegion at_scale(double t) const;
  /// Threshold check against dimension d; throws ArgumentError/DomainError.
  void validate(Index d) const;
  /// Value of the region functional at y, scaled so that membership is value > 1.
  double excess_ratio(const Eigen::Ref<const Vector>& y) const;
  bool contains(const Eigen::Ref<const Vector>& y) const { return excess_ratio(y) > 1.0; }
};

double nu_max(const MaxLinearModel& model, const Vector& x);
double nu_min(const MaxLinearModel& model, const Vector& x);
double nu_sum(const MaxLinearModel& model, const Vector& v, double x);
double nu_min_of_sums(const MaxLinearModel& model, const Vector& v, const Groups& groups,
                      double x);
double nu_max_of_sums(const MaxLinearModel& model, const Vector& v, const Groups& groups,
                      double x);
double nu_generic(const MaxLinearModel& model, const Functional& f, double x);

/// x^-2 v' Sigma v for alpha = 2 and x^-1 sum_j v_j s_jj for alpha = 1.
double nu_sum_from_tpdm(const TailMatrix& sigma, const Vector& v, double x);

/// r* with f(r* w) = x by bracketed bisection; +inf if f stays below x up to 1e30.
double radial_root(const Functional& f, const Vector& w, double x);

/// Per-column terms of nu; their sum is nu(region).
std::vector<double> column_contributions(const MaxLinearModel& model, const FailureRegion& region);
double exponent_measure(const MaxLinearModel& model, const FailureRegion& region);

/// Scale t with nu(shape.at_scale(t)) = target.
double calibrate_threshold(const MaxLinearModel& model, const FailureRegion& shape, double target);

struct FailureProbability {
  double nu = 0.0;
  double p = 0.0;               ///< min(nu, 1)
  bool not_extreme = false;     ///< nu > 0.1
  bool clamped = false;         ///< nu > 1
  std::vector<double> per_column;
};

FailureProbability failure_probability(const MaxLinearModel& model, const FailureRegion& region);

struct MonteCarloEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
  std::size_t hits = 0;
  std::size_t n = 0;
};

/// Fraction of n rows of simulate(model, n, seed) inside the region.
MonteCarloEstimate mc_failure_probability(const MaxLinearModel& model, const FailureRegion& region,
                                          std::size_t n, std::uint64_t seed,
                                          const Exec& exec = {});

double empirical_failure_probability(const Matrix& data, const FailureRegion& region);

}  // namespace exdep
