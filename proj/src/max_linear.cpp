#include "exdep/max_linear.hpp"

#include "exdep/parallel.hpp"
#include "exdep/philox.hpp"

#include <cmath>

namespace exdep {

namespace {
constexpr std::uint32_t kSimulationStream = 0x51u;
constexpr std::size_t kSimChunk = 8192;
}  // namespace

MaxLinearModel::MaxLinearModel(Matrix a, double alpha) : a_(std::move(a)), alpha_(alpha) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw ArgumentError("tail index must be positive");
  if (a_.rows() == 0 || a_.cols() == 0) throw ArgumentError("coefficient matrix is empty");
  if (!a_.allFinite()) throw DomainError("coefficients must be finite");
  if (a_.minCoeff() < 0.0) throw DomainError("coefficients must be nonnegative");
  for (Index l = 0; l < a_.cols(); ++l) {
    if (!(a_.col(l).maxCoeff() > 0.0)) {
      throw DomainError("every column of the coefficient matrix needs a positive entry");
    }
  }
}

Matrix entrywise_power(const Matrix& m, double exponent) {
  if (exponent == 1.0) return m;
  if (exponent == 2.0) return m.cwiseProduct(m);
  if (exponent == 0.5) return m.cwiseSqrt();
  return m.unaryExpr([exponent](double x) { return std::pow(x, exponent); });
}

TailMatrix tpdm_of_model(const MaxLinearModel& model) {
  const Matrix a_star = entrywise_power(model.coefficients(), model.alpha() / 2.0);
  return TailMatrix(a_star * a_star.transpose(), model.alpha());
}

std::vector<AngularAtom> angular_atoms(const MaxLinearModel& model) {
  std::vector<AngularAtom> atoms;
  const auto& a = model.coefficients();
  atoms.reserve(static_cast<std::size_t>(a.cols()));
  for (Index l = 0; l < a.cols(); ++l) {
    const double norm = lalpha_norm(a.col(l), model.alpha());
    atoms.push_back({std::pow(norm, model.alpha()), a.col(l) / norm});
  }
  return atoms;
}

Vector marginal_scales(const MaxLinearModel& model) {
  const auto& a = model.coefficients();
  Vector scales(a.rows());
  for (Index j = 0; j < a.rows(); ++j) {
    CompensatedSum acc;
    for (Index l = 0; l < a.cols(); ++l) acc.add(std::pow(a(j, l), model.alpha()));
    scales(j) = std::pow(acc.value(), 1.0 / model.alpha());
  }
  return scales;
}

Matrix simulate_rows(const MaxLinearModel& model, std::uint64_t first, std::size_t count,
                     std::uint64_t seed) {
  const auto& a = model.coefficients();
  const double inv_alpha = -1.0 / model.alpha();
  const CounterRng rng(seed, kSimulationStream);
  Matrix out = Matrix::Zero(static_cast<Index>(count), a.rows());
  Vector z(a.cols());
  for (std::size_t r = 0; r < count; ++r) {
    const std::uint64_t row = first + r;
    for (Index l = 0; l < a.cols(); l += 2) {
      const auto u = rng.uniform_pair(row, static_cast<std::uint32_t>(l / 2));
      z(l) = std::pow(-std::log(u[0]), inv_alpha);
      if (l + 1 < a.cols()) z(l + 1) = std::pow(-std::log(u[1]), inv_alpha);
    }
    for (Index j = 0; j < a.rows(); ++j) {
      double m = 0.0;
      for (Index l = 0; l < a.cols(); ++l) m = std::max(m, a(j, l) * z(l));
      out(static_cast<Index>(r), j) = m;
    }
  }
  return out;
}

Matrix simulate(const MaxLinearModel& model, std::size_t n, std::uint64_t seed,
                const Exec& exec) {
  if (n < 1) throw ArgumentError("simulation size must be at least 1");
  Matrix out(static_cast<Index>(n), model.dim());
  for_each_chunk(chunk_count(n, kSimChunk), exec, [&](std::size_t c) {
    const auto range = chunk_range(c, n, kSimChunk);
    out.middleRows(static_cast<Index>(range.begin), static_cast<Index>(range.end - range.begin)) =
        simulate_rows(model, range.begin, range.end - range.begin, seed);
  });
  return out;
}

}  // namespace exdep
