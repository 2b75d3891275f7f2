#include "exdep/tail_margins.hpp"

#include "exdep/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

namespace exdep {

namespace {

void require_positive(std::span<const double> sample) {
  for (double x : sample) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw DomainError("tail index estimation requires finite positive sample values");
    }
  }
}

void require_k(std::size_t n, std::size_t k) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (k >= n) throw ArgumentError("k must be smaller than the sample size");
}

TailIndexEstimate make_estimate(double gamma, std::size_t k) {
  TailIndexEstimate est;
  est.gamma_hat = gamma;
  est.alpha_hat = gamma > 0.0 ? 1.0 / gamma : std::numeric_limits<double>::infinity();
  est.k_used = k;
  return est;
}

// Hill values gamma(k) for k = 1..k_max over a descending sample.
std::vector<double> hill_values(const std::vector<double>& desc, std::size_t k_max) {
  std::vector<double> out(k_max + 1, 0.0);
  const double top = std::log(desc[0]);
  CompensatedSum prefix;
  for (std::size_t k = 1; k <= k_max; ++k) {
    prefix.add(std::log(desc[k - 1]) - top);
    out[k] = prefix.value() / static_cast<double>(k) - (std::log(desc[k]) - top);
  }
  return out;
}

}  // namespace

std::vector<double> descending_order_statistics(std::span<const double> sample) {
  std::vector<double> sorted(sample.begin(), sample.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted;
}

TailIndexEstimate hill_estimate(std::span<const double> sample, std::size_t k) {
  require_positive(sample);
  require_k(sample.size(), k);
  const auto desc = descending_order_statistics(sample);
  const double base = desc[k];
  CompensatedSum acc;
  for (std::size_t i = 0; i < k; ++i) acc.add(std::log(desc[i] / base));
  auto est = make_estimate(acc.value() / static_cast<double>(k), k);
  est.path = {{k, est.gamma_hat}};
  return est;
}

std::vector<std::pair<std::size_t, double>> hill_path(std::span<const double> sample,
                                                      std::size_t k_lo, std::size_t k_hi) {
  require_positive(sample);
  require_k(sample.size(), k_lo);
  require_k(sample.size(), k_hi);
  if (k_lo > k_hi) throw ArgumentError("empty k range");
  const auto desc = descending_order_statistics(sample);
  const auto values = hill_values(desc, k_hi);
  std::vector<std::pair<std::size_t, double>> path;
  path.reserve(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) path.emplace_back(k, values[k]);
  return path;
}

namespace {

std::size_t smoothing_upper(std::size_t k, double smoothing) {
  return static_cast<std::size_t>(std::floor(smoothing * static_cast<double>(k)));
}

void require_smoothing(std::size_t n, std::size_t k, double smoothing) {
  if (!(smoothing > 1.0)) throw ArgumentError("smoothing factor must exceed 1");
  require_k(n, k);
  if (smoothing_upper(k, smoothing) >= n) {
    throw ArgumentError("smoothing window reaches beyond the sample");
  }
}

}  // namespace

TailIndexEstimate smoothed_hill(std::span<const double> sample, std::size_t k, double smoothing) {
  require_positive(sample);
  require_smoothing(sample.size(), k, smoothing);
  auto path = smoothed_hill_path(sample, k, k, smoothing);
  auto est = make_estimate(path.front().second, k);
  est.path = std::move(path);
  return est;
}

std::vector<std::pair<std::size_t, double>> smoothed_hill_path(std::span<const double> sample,
                                                               std::size_t k_lo, std::size_t k_hi,
                                                               double smoothing) {
  require_positive(sample);
  if (k_lo > k_hi) throw ArgumentError("empty k range");
  require_smoothing(sample.size(), k_lo, smoothing);
  require_smoothing(sample.size(), k_hi, smoothing);
  const auto desc = descending_order_statistics(sample);
  const std::size_t top = smoothing_upper(k_hi, smoothing);
  const auto values = hill_values(desc, top);
  // prefix[j] = sum of values[1..j]
  std::vector<long double> prefix(top + 1, 0.0L);
  for (std::size_t j = 1; j <= top; ++j) prefix[j] = prefix[j - 1] + values[j];
  std::vector<std::pair<std::size_t, double>> path;
  path.reserve(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const std::size_t upper = smoothing_upper(k, smoothing);
    const long double total = prefix[upper] - prefix[k - 1];
    path.emplace_back(k, static_cast<double>(total / static_cast<long double>(upper - k + 1)));
  }
  return path;
}

EyeballResult eyeball_threshold(std::span<const std::pair<std::size_t, double>> path,
                                const EyeballConfig& config) {
  if (path.empty()) throw ArgumentError("empty estimate path");
  if (config.k_min < 1) throw ArgumentError("k_min must be at least 1");
  const std::size_t n_path = path.size();
  const auto window = std::max<std::size_t>(
      static_cast<std::size_t>(std::ceil(config.window_fraction * static_cast<double>(n_path))),
      config.min_window);

  std::size_t first = 0;
  while (first < n_path && path[first].first < config.k_min) ++first;
  if (first == n_path) throw ArgumentError("no path entry with k >= k_min");

  for (std::size_t p = first; p + window < n_path; ++p) {
    const double centre = path[p].second;
    const double half_width = config.band * std::abs(centre);
    std::size_t inside = 0;
    for (std::size_t q = p + 1; q <= p + window; ++q) {
      if (std::abs(path[q].second - centre) <= half_width) ++inside;
    }
    if (static_cast<double>(inside) >= config.coverage * static_cast<double>(window)) {
      return {path[p].first, false};
    }
  }

  // No stable window: the k whose window has the least spread.
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_k = path[first].first;
  for (std::size_t p = first; p < n_path; ++p) {
    const std::size_t end = std::min(n_path, p + window);
    if (end - p < 2 && p != first) break;
    double mean = 0.0;
    for (std::size_t q = p; q < end; ++q) mean += path[q].second;
    mean /= static_cast<double>(end - p);
    double var = 0.0;
    for (std::size_t q = p; q < end; ++q) var += (path[q].second - mean) * (path[q].second - mean);
    var /= static_cast<double>(end - p);
    if (var < best) {
      best = var;
      best_k = path[p].first;
    }
  }
  return {best_k, true};
}

TailIndexEstimate automated_tail_index(std::span<const double> sample,
                                       const TailIndexConfig& config) {
  require_positive(sample);
  const std::size_t n = sample.size();
  if (n < 3) throw ArgumentError("sample too small for tail index estimation");
  auto k_hi = std::min<std::size_t>(
      n - 1, static_cast<std::size_t>(std::floor(config.max_k_fraction * static_cast<double>(n))));
  if (config.variant == HillVariant::Smoothed) {
    k_hi = std::min<std::size_t>(
        k_hi, static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) / config.smoothing)));
  }
  if (k_hi < std::max<std::size_t>(config.eyeball.k_min, 1)) {
    throw ArgumentError("sample too small for the configured k_min");
  }
  auto path = config.variant == HillVariant::Smoothed
                  ? smoothed_hill_path(sample, 1, k_hi, config.smoothing)
                  : hill_path(sample, 1, k_hi);
  const auto choice = eyeball_threshold(path, config.eyeball);
  auto est = make_estimate(path[choice.k_star - 1].second, choice.k_star);
  est.fallback = choice.fallback;
  est.path = std::move(path);
  return est;
}

TailIndexEstimate pooled_alpha(const Matrix& data, std::size_t k, HillVariant variant,
                               double smoothing) {
  // Column-major storage stacks the columns one after another.
  const Matrix copy = data;
  std::span<const double> flat(copy.data(), static_cast<std::size_t>(copy.size()));
  return variant == HillVariant::Smoothed ? smoothed_hill(flat, k, smoothing)
                                          : hill_estimate(flat, k);
}

TailIndexEstimate pooled_alpha_automated(const Matrix& data, const TailIndexConfig& config) {
  const Matrix copy = data;
  return automated_tail_index(
      std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())), config);
}

// ---------------------------------------------------------------------------

double GpdFit::survival(double y) const {
  if (y <= 0.0) return 1.0;
  if (gamma_hat == 0.0) return std::exp(-y / sigma_hat);
  const double z = gamma_hat * y / sigma_hat;
  if (z <= -1.0) return 0.0;
  return std::exp(-std::log1p(z) / gamma_hat);
}

double GpdFit::excess_quantile(double s) const {
  if (!(s > 0.0 && s <= 1.0)) throw ArgumentError("survival probability must lie in (0, 1]");
  if (gamma_hat == 0.0) return -sigma_hat * std::log(s);
  return sigma_hat * std::expm1(-gamma_hat * std::log(s)) / gamma_hat;
}

double gpd_log_likelihood(std::span<const double> excesses, double sigma, double gamma) {
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(excesses.size());
  CompensatedSum acc;
  if (std::abs(gamma) < 1e-12) {
    for (double y : excesses) acc.add(y / sigma);
    return -n * std::log(sigma) - acc.value();
  }
  for (double y : excesses) {
    const double z = gamma * y / sigma;
    if (z <= -1.0) return -std::numeric_limits<double>::infinity();
    acc.add(std::log1p(z));
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / gamma) * acc.value();
}

namespace {

void check_excesses(std::span<const double> excesses, std::size_t min_count) {
  if (excesses.size() < min_count) {
    throw ArgumentError("GPD fit needs at least " + std::to_string(min_count) + " excesses");
  }
  for (double y : excesses) {
    if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("GPD excesses must be positive");
  }
}

struct Simplex {
  std::array<std::array<double, 2>, 3> x;
  std::array<double, 3> f;
};

// Nelder-Mead over two parameters. Returns true on convergence.
template <class Objective>
bool nelder_mead(Objective&& objective, Simplex& s, std::size_t max_iter, double tol) {
  for (int i = 0; i < 3; ++i) s.f[i] = objective(s.x[i]);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s.f[a] < s.f[b]; });
    const int best = order[0], mid = order[1], worst = order[2];

    const double spread = std::abs(s.f[worst] - s.f[best]);
    double diameter = 0.0;
    for (int i : {mid, worst}) {
      for (int c = 0; c < 2; ++c) diameter = std::max(diameter, std::abs(s.x[i][c] - s.x[best][c]));
    }
    if (std::isfinite(s.f[worst]) && spread <= tol * (1.0 + std::abs(s.f[best])) &&
        diameter <= 1e-9) {
      return true;
    }

    std::array<double, 2> centroid{};
    for (int c = 0; c < 2; ++c) centroid[c] = 0.5 * (s.x[best][c] + s.x[mid][c]);
    auto along = [&](double t) {
      return std::array<double, 2>{centroid[0] + t * (s.x[worst][0] - centroid[0]),
                                   centroid[1] + t * (s.x[worst][1] - centroid[1])};
    };

    const auto reflected = along(-1.0);
    const double fr = objective(reflected);
    if (fr < s.f[best]) {
      const auto expanded = along(-2.0);
      const double fe = objective(expanded);
      if (fe < fr) {
        s.x[worst] = expanded;
        s.f[worst] = fe;
      } else {
        s.x[worst] = reflected;
        s.f[worst] = fr;
      }
      continue;
    }
    if (fr < s.f[mid]) {
      s.x[worst] = reflected;
      s.f[worst] = fr;
      continue;
    }
    const bool outside = fr < s.f[worst];
    const auto contracted = outside ? along(-0.5) : along(0.5);
    const double fc = objective(contracted);
    if (fc < std::min(fr, s.f[worst])) {
      s.x[worst] = contracted;
      s.f[worst] = fc;
      continue;
    }
    for (int i : {mid, worst}) {
      for (int c = 0; c < 2; ++c) s.x[i][c] = s.x[best][c] + 0.5 * (s.x[i][c] - s.x[best][c]);
      s.f[i] = objective(s.x[i]);
    }
  }
  return false;
}

std::size_t distinct_count(std::span<const double> values) {
  return std::set<double>(values.begin(), values.end()).size();
}

}  // namespace

GpdFit fit_gpd_pwm(std::span<const double> excesses) {
  check_excesses(excesses, 2);
  std::vector<double> sorted(excesses.begin(), excesses.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  CompensatedSum a0, a1;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double p = (static_cast<double>(i + 1) - 0.35) / n;
    a0.add(sorted[i]);
    a1.add((1.0 - p) * sorted[i]);
  }
  const double m0 = a0.value() / n;
  const double m1 = a1.value() / n;
  GpdFit fit;
  fit.method = "pwm";
  fit.n_exceed = sorted.size();
  const double denom = m0 - 2.0 * m1;
  if (denom > 0.0) {
    fit.gamma_hat = 2.0 - m0 / denom;
    fit.sigma_hat = 2.0 * m0 * m1 / denom;
  } else {
    fit.gamma_hat = 0.0;
    fit.sigma_hat = m0;
  }
  // Keep the largest observation inside the support.
  if (fit.gamma_hat < 0.0) {
    fit.sigma_hat = std::max(fit.sigma_hat, -fit.gamma_hat * sorted.back() * (1.0 + 1e-9));
  }
  fit.log_likelihood = gpd_log_likelihood(excesses, fit.sigma_hat, fit.gamma_hat);
  fit.degenerate = distinct_count(excesses) < 3;
  return fit;
}

GpdFit fit_gpd(std::span<const double> excesses, const GpdConfig& config) {
  check_excesses(excesses, config.min_excesses);
  const double y_max = *std::max_element(excesses.begin(), excesses.end());
  const double lo = config.gamma_lower;
  const double hi = config.gamma_upper;

  auto objective = [&](const std::array<double, 2>& p) {
    const double gamma = p[1];
    if (!(gamma > lo && gamma < hi)) return std::numeric_limits<double>::infinity();
    const double ll = gpd_log_likelihood(excesses, std::exp(p[0]), gamma);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  // Start from the moment estimates, pulled inside the bracket and support.
  GpdFit start = fit_gpd_pwm(excesses);
  double g0 = std::clamp(start.gamma_hat, lo + 0.05, hi - 0.05);
  double s0 = start.sigma_hat > 0.0 ? start.sigma_hat : 1.0;
  if (g0 < 0.0) s0 = std::max(s0, -g0 * y_max * 1.01);

  Simplex simplex;
  simplex.x = {{{std::log(s0), g0}, {std::log(s0) + 0.1, g0}, {std::log(s0), g0 + 0.05}}};
  const bool converged = nelder_mead(objective, simplex, config.max_iterations, config.tolerance);
  const auto best_it = std::min_element(simplex.f.begin(), simplex.f.end());
  const auto& best = simplex.x[static_cast<std::size_t>(best_it - simplex.f.begin())];

  if (!converged || !std::isfinite(*best_it)) {
    GpdFit fallback = fit_gpd_pwm(excesses);
    if (!std::isfinite(fallback.log_likelihood) || !(fallback.sigma_hat > 0.0)) {
      throw GpdFitError("GPD fit failed: optimizer did not converge and moments are inadmissible",
                        std::exp(best[0]), best[1]);
    }
    fallback.degenerate = true;
    return fallback;
  }

  GpdFit fit;
  fit.sigma_hat = std::exp(best[0]);
  fit.gamma_hat = best[1];
  fit.n_exceed = excesses.size();
  fit.log_likelihood = -*best_it;
  fit.method = "mle";
  fit.degenerate = distinct_count(excesses) < 3 || fit.gamma_hat - lo < 1e-6 ||
                   hi - fit.gamma_hat < 1e-6;
  return fit;
}

// ---------------------------------------------------------------------------

double order_statistic_quantile(std::span<const double> sample, double level) {
  if (sample.empty()) throw ArgumentError("empty sample");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("quantile level must lie in (0, 1)");
  std::vector<double> sorted(sample.begin(), sample.end());
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

SemiParametricCdf::SemiParametricCdf(std::span<const double> sample)
    : sorted_(sample.begin(), sample.end()) {
  if (sorted_.empty()) throw ArgumentError("empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

SemiParametricCdf::SemiParametricCdf(std::span<const double> sample, double threshold,
                                     GpdFit tail)
    : SemiParametricCdf(sample) {
  threshold_ = threshold;
  has_tail_ = true;
  tail_ = std::move(tail);
  tail_.threshold = threshold;
  exceed_fraction_ = 1.0 - empirical(threshold);
  if (!(exceed_fraction_ > 0.0)) throw ArgumentError("threshold leaves no exceedances");
}

double SemiParametricCdf::empirical(double y) const {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), y) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

double SemiParametricCdf::operator()(double y) const {
  if (!has_tail_ || y <= threshold_) return empirical(y);
  return 1.0 - exceed_fraction_ * tail_.survival(y - threshold_);
}

double SemiParametricCdf::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("probability must lie in (0, 1)");
  if (has_tail_ && p > 1.0 - exceed_fraction_) {
    return threshold_ + tail_.excess_quantile((1.0 - p) / exceed_fraction_);
  }
  const auto n = sorted_.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted_[rank - 1];
}

double frechet2_transform(double probability) {
  return std::pow(-std::log(probability), -0.5);
}

SemiParametricCdf fit_semiparametric_cdf(std::span<const double> column,
                                         const StandardizeConfig& config) {
  if (!config.use_gpd) return SemiParametricCdf(column);
  const double u = order_statistic_quantile(column, config.threshold_level);
  std::vector<double> excesses;
  for (double x : column) {
    if (x > u) excesses.push_back(x - u);
  }
  return SemiParametricCdf(column, u, fit_gpd(excesses, config.gpd));
}

StandardizedData standardize_frechet(const Matrix& data, const StandardizeConfig& config,
                                     const Exec& exec) {
  const auto n = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (n < 2) throw ArgumentError("standardization needs at least two rows");
  StandardizedData out;
  out.values.resize(data.rows(), data.cols());
  out.plateau_guards.assign(d, 0);
  std::vector<std::optional<SemiParametricCdf>> cdfs(d);
  const double plateau = (static_cast<double>(n) - 0.5) / static_cast<double>(n);

  for_each_chunk(d, exec, [&](std::size_t j) {
    const auto col = static_cast<Index>(j);
    const Vector column = data.col(col);
    auto cdf = fit_semiparametric_cdf(
        std::span<const double>(column.data(), static_cast<std::size_t>(column.size())), config);
    for (Index i = 0; i < data.rows(); ++i) {
      double p = cdf(data(i, col));
      if (!(p < 1.0)) {
        p = plateau;
        ++out.plateau_guards[j];
      }
      out.values(i, col) = frechet2_transform(p);
    }
    cdfs[j] = std::move(cdf);
  });
  out.cdfs.reserve(d);
  for (auto& c : cdfs) out.cdfs.push_back(std::move(*c));
  return out;
}

}  // namespace exdep
