#pragma once

// Univariate heavy-tail estimation (Hill, smoothed Hill, automated threshold
// choice), generalized Pareto fits for threshold excesses, and the
// semi-parametric standardization of margins to unit Frechet with shape 2.

#include "exdep/common.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace exdep {

struct TailIndexEstimate {
  double gamma_hat = 0.0;
  /// 1 / gamma_hat, or +inf when gamma_hat == 0.
  double alpha_hat = std::numeric_limits<double>::infinity();
  std::size_t k_used = 0;
  /// (k, gamma_hat(k)) diagnostics, ascending in k.
  std::vector<std::pair<std::size_t, double>> path;
  /// Set when the automated threshold rule found no stable window.
  bool fallback = false;
};

/// Sample sorted in descending order with ties kept in original index order.
std::vector<double> descending_order_statistics(std::span<const double> sample);

/// gamma_hat = (1/k) sum_{i=1..k} log(X_(n-i+1) / X_(n-k)).
TailIndexEstimate hill_estimate(std::span<const double> sample, std::size_t k);

/// Hill estimates for every k in [k_lo, k_hi], sharing one sort.
std::vector<std::pair<std::size_t, double>> hill_path(std::span<const double> sample,
                                                      std::size_t k_lo, std::size_t k_hi);

/// Average of Hill estimates over k .. floor(smoothing * k).
TailIndexEstimate smoothed_hill(std::span<const double> sample, std::size_t k,
                                double smoothing = 2.0);

std::vector<std::pair<std::size_t, double>> smoothed_hill_path(std::span<const double> sample,
                                                               std::size_t k_lo, std::size_t k_hi,
                                                               double smoothing = 2.0);

struct EyeballConfig {
  std::size_t k_min = 15;
  /// Window length is max(ceil(window_fraction * path length), min_window).
  double window_fraction = 0.02;
  std::size_t min_window = 10;
  /// Band half-width relative to gamma_hat(k).
  double band = 0.3;
  /// Required share of window estimates inside the band.
  double coverage = 0.9;
};

struct EyeballResult {
  std::size_t k_star = 0;
  bool fallback = false;
};

/// Automated eye-ball rule: the smallest k >= k_min whose forward window of
/// estimates mostly stays within +-band * gamma(k). Without such a k, falls
/// back to the k minimizing the rolling variance over the window.
EyeballResult eyeball_threshold(std::span<const std::pair<std::size_t, double>> path,
                                const EyeballConfig& config = {});

enum class HillVariant { Raw, Smoothed };

struct TailIndexConfig {
  HillVariant variant = HillVariant::Raw;
  double smoothing = 2.0;
  /// Upper end of the k range as a fraction of n.
  double max_k_fraction = 0.5;
  EyeballConfig eyeball{};
};

/// Hill (or smoothed Hill) path over k with the eye-ball choice of k.
TailIndexEstimate automated_tail_index(std::span<const double> sample,
                                       const TailIndexConfig& config = {});

/// Tail index on the n*d sample obtained by stacking the columns of `data`.
TailIndexEstimate pooled_alpha(const Matrix& data, std::size_t k,
                               HillVariant variant = HillVariant::Raw, double smoothing = 2.0);

TailIndexEstimate pooled_alpha_automated(const Matrix& data, const TailIndexConfig& config = {});

// ---------------------------------------------------------------------------
// Generalized Pareto

struct GpdFit {
  double sigma_hat = 1.0;
  double gamma_hat = 0.0;
  double threshold = 0.0;
  std::size_t n_exceed = 0;
  double log_likelihood = 0.0;
  /// "mle" or "pwm" (probability-weighted moments fallback).
  std::string method = "mle";
  bool degenerate = false;

  /// Survival function of the excess y >= 0.
  double survival(double y) const;
  /// Inverse of survival(): the excess with survival probability s in (0, 1].
  double excess_quantile(double s) const;
};

/// Raised when neither the likelihood optimizer nor the moment fallback
/// produced admissible parameters. Carries the last optimizer iterate.
class GpdFitError : public EstimationError {
 public:
  GpdFitError(const std::string& what, double sigma, double gamma)
      : EstimationError(what), last_sigma(sigma), last_gamma(gamma) {}
  double last_sigma;
  double last_gamma;
};

struct GpdConfig {
  double gamma_lower = -0.5;
  double gamma_upper = 1.0;
  std::size_t min_excesses = 10;
  std::size_t max_iterations = 4000;
  double tolerance = 1e-10;
};

double gpd_log_likelihood(std::span<const double> excesses, double sigma, double gamma);

/// Maximum likelihood fit to positive excesses; falls back to
/// probability-weighted moments if the optimizer does not converge.
GpdFit fit_gpd(std::span<const double> excesses, const GpdConfig& config = {});

/// Probability-weighted moment estimates (Hosking & Wallis).
GpdFit fit_gpd_pwm(std::span<const double> excesses);

// ---------------------------------------------------------------------------
// Semi-parametric CDF and standardization

/// Order-statistic quantile X_(ceil(level * n)), 1-based, clamped to [1, n].
double order_statistic_quantile(std::span<const double> sample, double level);

/// Empirical CDF below the threshold u, GPD tail above it.
class SemiParametricCdf {
 public:
  /// Empirical-only CDF (no parametric tail).
  explicit SemiParametricCdf(std::span<const double> sample);
  SemiParametricCdf(std::span<const double> sample, double threshold, GpdFit tail);

  double operator()(double y) const;
  /// Generalized inverse inf{y : F(y) >= p}, p in (0, 1).
  double quantile(double p) const;

  double threshold() const { return threshold_; }
  bool has_tail() const { return has_tail_; }
  const GpdFit& tail() const { return tail_; }
  /// 1 - F_empirical(u).
  double exceedance_fraction() const { return exceed_fraction_; }
  std::size_t sample_size() const { return sorted_.size(); }

 private:
  double empirical(double y) const;

  std::vector<double> sorted_;
  double threshold_ = std::numeric_limits<double>::infinity();
  bool has_tail_ = false;
  GpdFit tail_{};
  double exceed_fraction_ = 0.0;
};

struct MarginalFit {
  std::string name;
  TailIndexEstimate tail_index;
  GpdFit gpd;
  double threshold = 0.0;
};

struct StandardizeConfig {
  double threshold_level = 0.95;
  /// When false, the plain empirical CDF is used throughout.
  bool use_gpd = true;
  GpdConfig gpd{};
};

struct StandardizedData {
  Matrix values;
  std::vector<SemiParametricCdf> cdfs;
  /// Per column: number of values whose CDF hit 1 and were mapped to the
  /// (n - 0.5) / n plateau instead.
  std::vector<std::size_t> plateau_guards;
};

/// x -> (-log F(x))^(-1/2): unit-scale Frechet with shape 2.
double frechet2_transform(double probability);

/// Builds one semi-parametric CDF for a column (threshold at the configured
/// empirical quantile, GPD fitted to excesses).
SemiParametricCdf fit_semiparametric_cdf(std::span<const double> column,
                                         const StandardizeConfig& config = {});

StandardizedData standardize_frechet(const Matrix& data, const StandardizeConfig& config = {},
                                     const Exec& exec = {});

}  // namespace exdep
