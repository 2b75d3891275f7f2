#include "exdep/tpdm.hpp"

#include "exdep/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace exdep {

TpdmValidation validate_tpdm(const Matrix& sigma, const ValidationTolerances& tol) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw ArgumentError("TPDM must be a non-empty square matrix");
  }
  TpdmValidation report;
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
  report.symmetry_defect = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  report.symmetric = report.symmetry_defect <= tol.symmetry * scale;
  report.min_entry = sigma.minCoeff();
  report.nonnegative = report.min_entry >= 0.0;
  report.trace = sigma.trace();
  const Matrix sym = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  report.min_eigenvalue = solver.eigenvalues().minCoeff();
  report.psd_tolerance = tol.psd * std::abs(report.trace);
  report.psd = report.min_eigenvalue >= -report.psd_tolerance;
  return report;
}

TailMatrix::TailMatrix(Matrix sigma, double alpha) : sigma_(std::move(sigma)), alpha_(alpha) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ArgumentError("tail index must be positive");
  if (sigma_.rows() != sigma_.cols() || sigma_.rows() == 0) {
    throw ArgumentError("TPDM must be a non-empty square matrix");
  }
  if (!sigma_.allFinite()) throw DomainError("TPDM entries must be finite");
  const double scale = sigma_.cwiseAbs().maxCoeff();
  const double defect = (sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff();
  if (defect > 1e-12 * scale) throw DomainError("TPDM must be symmetric");
  if (sigma_.minCoeff() < -1e-12 * scale) throw DomainError("TPDM entries must be nonnegative");
  sigma_ = (0.5 * (sigma_ + sigma_.transpose())).cwiseMax(0.0);
}

double lalpha_norm(const Eigen::Ref<const Vector>& x, double alpha) {
  const double top = x.cwiseAbs().maxCoeff();
  if (top == 0.0) return 0.0;
  if (alpha == 1.0) return x.cwiseAbs().sum();
  CompensatedSum acc;
  for (Index j = 0; j < x.size(); ++j) acc.add(std::pow(std::abs(x(j)) / top, alpha));
  return top * std::pow(acc.value(), 1.0 / alpha);
}

PolarSample polar_transform(const Matrix& data, double alpha) {
  if (!(alpha > 0.0)) throw ArgumentError("tail index must be positive");
  if (data.size() > 0 && data.minCoeff() < 0.0) {
    throw DomainError("polar transform requires nonnegative data");
  }
  if (!data.allFinite()) throw DomainError("polar transform requires finite data");
  PolarSample polar;
  polar.alpha = alpha;
  polar.input_rows = static_cast<std::size_t>(data.rows());
  std::vector<Index> kept;
  std::vector<double> radii;
  kept.reserve(static_cast<std::size_t>(data.rows()));
  for (Index i = 0; i < data.rows(); ++i) {
    const double r = lalpha_norm(data.row(i).transpose(), alpha);
    if (r > 0.0) {
      kept.push_back(i);
      radii.push_back(r);
    } else {
      ++polar.dropped_zero_rows;
    }
  }
  polar.radii = Eigen::Map<Vector>(radii.data(), static_cast<Index>(radii.size()));
  polar.angles.resize(static_cast<Index>(kept.size()), data.cols());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    polar.angles.row(static_cast<Index>(r)) = data.row(kept[r]) / radii[r];
  }
  return polar;
}

MassEstimate estimate_mass(const PolarSample& polar, double quantile_level) {
  if (!(quantile_level > 0.0 && quantile_level < 1.0)) {
    throw ArgumentError("quantile level must lie in (0, 1)");
  }
  const auto n_kept = static_cast<std::size_t>(polar.radii.size());
  if (n_kept == 0) throw EstimationError("no nonzero observations");
  // Dropped all-zero rows have radius 0 and sit at the bottom of the order.
  const std::size_t n = std::max(polar.input_rows, n_kept);
  const std::size_t n_zero = n - n_kept;
  auto rank = static_cast<std::size_t>(std::ceil(quantile_level * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);

  MassEstimate mass;
  mass.quantile_level = quantile_level;
  mass.alpha = polar.alpha;
  mass.n = n;
  if (rank <= n_zero) {
    mass.r0 = 0.0;
  } else {
    std::vector<double> r(polar.radii.data(), polar.radii.data() + n_kept);
    const auto pos = static_cast<std::ptrdiff_t>(rank - n_zero - 1);
    std::nth_element(r.begin(), r.begin() + pos, r.end());
    mass.r0 = r[static_cast<std::size_t>(pos)];
  }
  mass.n_exc = static_cast<std::size_t>((polar.radii.array() > mass.r0).count());
  if (mass.n_exc == 0) {
    throw EstimationError("no radius exceeds the quantile at level " +
                          std::to_string(quantile_level));
  }
  mass.m_hat = std::pow(mass.r0, polar.alpha) * static_cast<double>(mass.n_exc) /
               static_cast<double>(n);
  return mass;
}

namespace {

constexpr std::size_t kRowChunk = 4096;

void check_consistent(const PolarSample& polar, const MassEstimate& mass) {
  if (polar.alpha != mass.alpha) {
    throw ArgumentError("polar sample and mass estimate use different tail indices");
  }
}

}  // namespace

TpdmEstimate estimate_tpdm(const PolarSample& polar, const MassEstimate& mass,
                           const Exec& exec) {
  check_consistent(polar, mass);
  const Index d = polar.angles.cols();
  const auto rows = static_cast<std::size_t>(polar.angles.rows());
  const double half = polar.alpha / 2.0;
  const std::size_t n_chunks = chunk_count(rows, kRowChunk);
  const auto pairs = static_cast<std::size_t>(d * (d + 1) / 2);
  std::vector<std::vector<CompensatedSum>> partial(n_chunks, std::vector<CompensatedSum>(pairs));

  for_each_chunk(n_chunks, exec, [&](std::size_t c) {
    const auto range = chunk_range(c, rows, kRowChunk);
    Vector v(d);
    auto& acc = partial[c];
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const auto row = static_cast<Index>(i);
      if (!(polar.radii(row) > mass.r0)) continue;
      for (Index j = 0; j < d; ++j) v(j) = std::pow(polar.angles(row, j), half);
      std::size_t slot = 0;
      for (Index j = 0; j < d; ++j) {
        for (Index k = j; k < d; ++k) acc[slot++].add(v(j) * v(k));
      }
    }
  });

  std::vector<CompensatedSum> total(pairs);
  for (const auto& chunk : partial) {
    for (std::size_t s = 0; s < pairs; ++s) total[s].merge(chunk[s]);
  }
  const double scale = std::pow(mass.r0, polar.alpha) / static_cast<double>(mass.n);
  Matrix sigma(d, d);
  std::size_t slot = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index k = j; k < d; ++k) {
      sigma(j, k) = sigma(k, j) = scale * total[slot++].value();
    }
  }
  auto validation = validate_tpdm(sigma);
  const bool warn = !validation.psd;
  return TpdmEstimate{TailMatrix(std::move(sigma), polar.alpha), validation, warn};
}

Matrix empirical_factor(const PolarSample& polar, const MassEstimate& mass) {
  check_consistent(polar, mass);
  if (mass.n_exc < 1) throw ArgumentError("empirical factor needs at least one exceedance");
  const double half = polar.alpha / 2.0;
  const double scale = std::sqrt(std::pow(mass.r0, polar.alpha) / static_cast<double>(mass.n));
  Matrix factor(polar.angles.cols(), static_cast<Index>(mass.n_exc));
  Index col = 0;
  for (Index i = 0; i < polar.radii.size(); ++i) {
    if (!(polar.radii(i) > mass.r0)) continue;
    for (Index j = 0; j < polar.angles.cols(); ++j) {
      factor(j, col) = scale * std::pow(polar.angles(i, j), half);
    }
    ++col;
  }
  return factor;
}

std::vector<MassStabilityRow> mass_stability_table(const PolarSample& polar, double first,
                                                   double last, double step) {
  if (!(step > 0.0)) throw ArgumentError("step must be positive");
  std::vector<MassStabilityRow> table;
  const auto count = static_cast<int>(std::floor((last - first) / step + 1e-9)) + 1;
  for (int s = 0; s < count; ++s) {
    const double level = first + step * s;
    try {
      const auto mass = estimate_mass(polar, level);
      table.push_back({level, mass.r0, mass.n_exc, mass.m_hat});
    } catch (const EstimationError&) {
      // Quantile at or above the largest radius.
    }
  }
  return table;
}

}  // namespace exdep
