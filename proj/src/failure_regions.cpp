#include "exdep/failure_regions.hpp"

#include "exdep/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace exdep {

namespace {

constexpr double kBracketCap = 1e30;
constexpr int kBisectionIterations = 200;
constexpr double kRelTol = 1e-12;
constexpr std::size_t kMcChunk = 8192;

void check_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be positive");
}

double group_extreme(const Vector& v, const Groups& groups, const Eigen::Ref<const Vector>& y,
                     bool take_min) {
  double out = take_min ? std::numeric_limits<double>::infinity() : 0.0;
  for (const auto& g : groups) {
    double s = 0.0;
    for (Index j : g) s += v(j) * y(j);
    out = take_min ? std::min(out, s) : std::max(out, s);
  }
  return out;
}

double sum_terms(const std::vector<double>& terms) {
  CompensatedSum acc;
  for (double t : terms) acc.add(t);
  return acc.value();
}

}  // namespace

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::Max: return "max";
    case RegionKind::Min: return "min";
    case RegionKind::Sum: return "sum";
    case RegionKind::MinOfSums: return "minsum";
    case RegionKind::MaxOfSums: return "maxsum";
    case RegionKind::Generic: return "generic";
  }
  return "unknown";
}

RegionKind region_kind_from_string(const std::string& name) {
  if (name == "max") return RegionKind::Max;
  if (name == "min") return RegionKind::Min;
  if (name == "sum") return RegionKind::Sum;
  if (name == "minsum") return RegionKind::MinOfSums;
  if (name == "maxsum") return RegionKind::MaxOfSums;
  if (name == "generic") return RegionKind::Generic;
  throw ArgumentError("unknown region kind '" + name + "'");
}

FailureRegion FailureRegion::max(Vector x) {
  FailureRegion r;
  r.kind = RegionKind::Max;
  r.x = std::move(x);
  r.label = "max";
  return r;
}

FailureRegion FailureRegion::min(Vector x) {
  FailureRegion r;
  r.kind = RegionKind::Min;
  r.x = std::move(x);
  r.label = "min";
  return r;
}

FailureRegion FailureRegion::sum(Vector v, double x) {
  FailureRegion r;
  r.kind = RegionKind::Sum;
  r.v = std::move(v);
  r.threshold = x;
  r.label = "sum";
  return r;
}

FailureRegion FailureRegion::min_of_sums(Vector v, Groups groups, double x) {
  FailureRegion r;
  r.kind = RegionKind::MinOfSums;
  r.v = std::move(v);
  r.groups = std::move(groups);
  r.threshold = x;
  r.label = "minsum";
  return r;
}

FailureRegion FailureRegion::max_of_sums(Vector v, Groups groups, double x) {
  FailureRegion r = min_of_sums(std::move(v), std::move(groups), x);
  r.kind = RegionKind::MaxOfSums;
  r.label = "maxsum";
  return r;
}

FailureRegion FailureRegion::generic(Functional f, double x, double degree, std::string label) {
  FailureRegion r;
  r.kind = RegionKind::Generic;
  r.f = std::move(f);
  r.threshold = x;
  r.degree = degree;
  r.label = std::move(label);
  return r;
}

FailureRegion FailureRegion::at_scale(double t) const {
  FailureRegion r = *this;
  if (kind == RegionKind::Max || kind == RegionKind::Min) {
    r.x = t * x;
  } else {
    r.threshold = t * threshold;
  }
  return r;
}

void FailureRegion::validate(Index d) const {
  switch (kind) {
    case RegionKind::Max:
    case RegionKind::Min:
      if (x.size() != d) throw ArgumentError("threshold vector has wrong dimension");
      if (!(x.minCoeff() > 0.0) || !x.allFinite()) throw DomainError("thresholds must be positive");
      return;
    case RegionKind::Sum:
    case RegionKind::MinOfSums:
    case RegionKind::MaxOfSums: {
      check_positive(threshold, "threshold");
      if (v.size() != d) throw ArgumentError("weight vector has wrong dimension");
      if (v.minCoeff() < 0.0 || !v.allFinite()) throw DomainError("weights must be nonnegative");
      if (kind == RegionKind::Sum) {
        if (std::abs(v.sum() - 1.0) > 1e-12) throw DomainError("sum weights must add up to 1");
        return;
      }
      std::vector<int> hits(static_cast<std::size_t>(d), 0);
      for (const auto& g : groups) {
        if (g.empty()) throw ArgumentError("empty group in partition");
        for (Index j : g) {
          if (j < 0 || j >= d) throw ArgumentError("group index out of range");
          ++hits[static_cast<std::size_t>(j)];
        }
      }
      if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; })) {
        throw ArgumentError("groups must partition the dimensions");
      }
      return;
    }
    case RegionKind::Generic:
      check_positive(threshold, "threshold");
      if (!f) throw ArgumentError("generic region needs a functional");
      return;
  }
}

double FailureRegion::excess_ratio(const Eigen::Ref<const Vector>& y) const {
  switch (kind) {
    case RegionKind::Max: return (y.array() / x.array()).maxCoeff();
    case RegionKind::Min: return (y.array() / x.array()).minCoeff();
    case RegionKind::Sum: return v.dot(y) / threshold;
    case RegionKind::MinOfSums: return group_extreme(v, groups, y, true) / threshold;
    case RegionKind::MaxOfSums: return group_extreme(v, groups, y, false) / threshold;
    case RegionKind::Generic: return f(y) / threshold;
  }
  return 0.0;
}

double radial_root(const Functional& f, const Vector& w, double x) {
  auto g = [&](double r) { return f(r * w); };
  double lo = 1.0;
  double hi = 1.0;
  if (g(1.0) < x) {
    while (g(hi) < x) {
      lo = hi;
      hi *= 2.0;
      if (hi > kBracketCap) return std::numeric_limits<double>::infinity();
    }
  } else {
    while (g(lo) >= x) {
      hi = lo;
      lo /= 2.0;
      if (lo < 1.0 / kBracketCap) {
        throw DomainError("functional does not cross the threshold along the ray");
      }
    }
  }
  for (int it = 0; it < kBisectionIterations && hi - lo > kRelTol * 1e-3 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> column_contributions(const MaxLinearModel& model, const FailureRegion& region) {
  region.validate(model.dim());
  const auto& a = model.coefficients();
  const double alpha = model.alpha();
  std::vector<double> terms(static_cast<std::size_t>(a.cols()), 0.0);
  for (Index l = 0; l < a.cols(); ++l) {
    const Vector col = a.col(l);
    double term = 0.0;
    if (region.kind == RegionKind::Generic) {
      const double norm = lalpha_norm(col, alpha);
      const double r = radial_root(region.f, col / norm, region.threshold);
      term = std::isinf(r) ? 0.0 : std::pow(norm / r, alpha);
    } else {
      term = std::pow(region.excess_ratio(col), alpha);
    }
    terms[static_cast<std::size_t>(l)] = term;
  }
  return terms;
}

double exponent_measure(const MaxLinearModel& model, const FailureRegion& region) {
  return sum_terms(column_contributions(model, region));
}

double nu_max(const MaxLinearModel& model, const Vector& x) {
  return exponent_measure(model, FailureRegion::max(x));
}

double nu_min(const MaxLinearModel& model, const Vector& x) {
  return exponent_measure(model, FailureRegion::min(x));
}

double nu_sum(const MaxLinearModel& model, const Vector& v, double x) {
  return exponent_measure(model, FailureRegion::sum(v, x));
}

double nu_min_of_sums(const MaxLinearModel& model, const Vector& v, const Groups& groups,
                      double x) {
  return exponent_measure(model, FailureRegion::min_of_sums(v, groups, x));
}

double nu_max_of_sums(const MaxLinearModel& model, const Vector& v, const Groups& groups,
                      double x) {
  return exponent_measure(model, FailureRegion::max_of_sums(v, groups, x));
}

double nu_generic(const MaxLinearModel& model, const Functional& f, double x) {
  return exponent_measure(model, FailureRegion::generic(f, x));
}

double nu_sum_from_tpdm(const TailMatrix& sigma, const Vector& v, double x) {
  FailureRegion::sum(v, x).validate(sigma.dim());
  if (sigma.alpha() == 2.0) return v.dot(sigma.sigma() * v) / (x * x);
  if (sigma.alpha() == 1.0) return v.dot(sigma.sigma().diagonal()) / x;
  throw ArgumentError("TPDM-only sum formula needs alpha 1 or 2");
}

double calibrate_threshold(const MaxLinearModel& model, const FailureRegion& shape,
                           double target) {
  if (!(target > 0.0) || !std::isfinite(target)) throw ArgumentError("target must be positive");
  const double nu1 = exponent_measure(model, shape.at_scale(1.0));
  if (!(nu1 > 0.0)) throw DomainError("region has zero exponent measure at every threshold");
  const bool homogeneous = shape.kind != RegionKind::Generic || shape.degree > 0.0;
  if (homogeneous) {
    const double degree = shape.kind == RegionKind::Generic ? shape.degree : 1.0;
    return std::pow(nu1 / target, degree / model.alpha());
  }
  // Bisection on log t; nu is non-increasing in t.
  auto nu_at = [&](double t) { return exponent_measure(model, shape.at_scale(t)); };
  double lo = 1.0;
  double hi = 1.0;
  if (nu1 > target) {
    while (nu_at(hi) > target) {
      lo = hi;
      hi *= 2.0;
      if (hi > kBracketCap) throw DomainError("cannot bracket the calibrated threshold");
    }
  } else {
    while (nu_at(lo) < target) {
      hi = lo;
      lo /= 2.0;
      if (lo < 1.0 / kBracketCap) throw DomainError("cannot bracket the calibrated threshold");
    }
  }
  for (int it = 0; it < kBisectionIterations && hi - lo > kRelTol * 1e-3 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (nu_at(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

FailureProbability failure_probability(const MaxLinearModel& model, const FailureRegion& region) {
  FailureProbability out;
  out.per_column = column_contributions(model, region);
  out.nu = sum_terms(out.per_column);
  out.not_extreme = out.nu > 0.1;
  out.clamped = out.nu > 1.0;
  out.p = std::min(out.nu, 1.0);
  return out;
}

MonteCarloEstimate mc_failure_probability(const MaxLinearModel& model, const FailureRegion& region,
                                          std::size_t n, std::uint64_t seed, const Exec& exec) {
  if (n < 10000) throw ArgumentError("Monte Carlo needs at least 10^4 draws");
  region.validate(model.dim());
  const std::size_t n_chunks = chunk_count(n, kMcChunk);
  std::vector<std::size_t> hits(n_chunks, 0);
  for_each_chunk(n_chunks, exec, [&](std::size_t c) {
    const auto range = chunk_range(c, n, kMcChunk);
    const Matrix y = simulate_rows(model, range.begin, range.end - range.begin, seed);
    std::size_t h = 0;
    for (Index i = 0; i < y.rows(); ++i) {
      if (region.contains(y.row(i).transpose())) ++h;
    }
    hits[c] = h;
  });
  MonteCarloEstimate out;
  out.n = n;
  for (auto h : hits) out.hits += h;
  out.p_hat = static_cast<double>(out.hits) / static_cast<double>(n);
  out.std_error = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(n));
  return out;
}

double empirical_failure_probability(const Matrix& data, const FailureRegion& region) {
  if (data.rows() == 0) throw ArgumentError("no observations");
  region.validate(data.cols());
  std::size_t hits = 0;
  for (Index i = 0; i < data.rows(); ++i) {
    if (region.contains(data.row(i).transpose())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.rows());
}

}  // namespace exdep
