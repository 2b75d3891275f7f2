#include "exdep/cp_decomposition.hpp"

#include "exdep/max_linear.hpp"
#include "exdep/parallel.hpp"
#include "exdep/philox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace exdep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kPragmaticStream = 0x70u;
constexpr std::size_t kPragmaticBatch = 64;

void clean_small(Matrix& m, double zero_tol) {
  if (zero_tol <= 0.0) return;
  m = m.unaryExpr([zero_tol](double x) { return std::abs(x) <= zero_tol ? 0.0 : x; });
}

DependenceRatio ratio_of(const Matrix& m, Index i, double zero_tol) {
  DependenceRatio out;
  const Index d = m.rows();
  const double zero_num = zero_tol * zero_tol;
  for (Index j = 0; j < d; ++j) {
    if (j == i) continue;
    for (Index k = 0; k < d; ++k) {
      if (k == i) continue;
      const double num = m(j, i) * m(k, i);
      double v = 0.0;
      if (num <= zero_num) {
        v = 0.0;
      } else if (m(j, k) <= zero_tol) {
        v = kInf;
      } else {
        v = num / (m(j, k) * m(i, i));
      }
      if (out.j < 0 || v > out.value) {
        out.value = v;
        out.j = j;
        out.k = k;
      }
    }
  }
  if (out.value == 0.0) out.j = out.k = -1;
  return out;
}

Matrix drop_index(const Matrix& m, Index i) {
  const Index d = m.rows();
  Matrix out(d - 1, d - 1);
  for (Index r = 0, rr = 0; r < d; ++r) {
    if (r == i) continue;
    for (Index c = 0, cc = 0; c < d; ++c) {
      if (c == i) continue;
      out(rr, cc++) = m(r, c);
    }
    ++rr;
  }
  return out;
}

// m already cleaned; m(i, i) > zero_tol.
PeelStep peel_cleaned(const Matrix& m, Index i, double zero_tol, double neg_floor,
                      const DecompositionOptions& opts) {
  PeelStep step;
  step.index = i;
  const auto ratio = ratio_of(m, i, zero_tol);
  step.d_value = ratio.value;
  step.arg_j = ratio.j;
  step.arg_k = ratio.k;
  step.unpeelable = std::isinf(ratio.value);
  step.boundary = std::abs(ratio.value - 1.0) <= opts.tol_d;

  const Index d = m.rows();
  step.tau = Vector::Zero(d);
  if (step.unpeelable) {
    step.tau(i) = std::sqrt(m(i, i));
    step.reduced = drop_index(m, i);
    return step;
  }
  const double c = std::sqrt(m(i, i) * std::max(ratio.value, 1.0));
  step.tau = m.col(i) / c;
  step.tau(i) = c;
  step.tau = step.tau.cwiseMax(0.0);
  Vector rest(d - 1);
  for (Index r = 0, rr = 0; r < d; ++r) {
    if (r != i) rest(rr++) = step.tau(r);
  }
  step.reduced = drop_index(m, i) - rest * rest.transpose();
  if (step.reduced.size() > 0 && step.reduced.minCoeff() < neg_floor) {
    throw ConsistencyError("remainder entry " + std::to_string(step.reduced.minCoeff()) +
                           " after peeling index " + std::to_string(i));
  }
  return step;
}

// Remaining sub-matrix along a partially executed path.
class PathState {
 public:
  PathState(const Matrix& sigma, const DecompositionOptions& opts)
      : opts_(opts), m_(sigma), d_(sigma.rows()) {
    const double scale = sigma.cwiseAbs().maxCoeff();
    zero_tol_ = opts.zero_tol_rel * scale;
    neg_floor_ = -opts.neg_tol_rel * scale;
    remaining_.resize(static_cast<std::size_t>(d_));
    std::iota(remaining_.begin(), remaining_.end(), Index{0});
    a_star_ = Matrix::Zero(d_, d_);
    clean_small(m_, zero_tol_);
  }

  std::size_t left() const { return remaining_.size(); }
  const std::vector<Index>& remaining() const { return remaining_; }

  /// D for every remaining dimension; zero margins report 0.
  std::vector<double> ratios() const {
    std::vector<double> out(remaining_.size(), 0.0);
    if (remaining_.size() < 2) return out;
    for (std::size_t r = 0; r < remaining_.size(); ++r) {
      const auto i = static_cast<Index>(r);
      out[r] = m_(i, i) <= zero_tol_ ? 0.0 : ratio_of(m_, i, zero_tol_).value;
    }
    return out;
  }

  /// Peels the original dimension `p`.
  void advance(Index p) {
    const auto it = std::find(remaining_.begin(), remaining_.end(), p);
    if (it == remaining_.end()) throw ArgumentError("index already peeled or out of range");
    const auto i = static_cast<Index>(it - remaining_.begin());
    const Index column = static_cast<Index>(path_.size());
    path_.push_back(p);

    if (remaining_.size() == 1) {
      const double s = m_(0, 0);
      if (s < neg_floor_) {
        throw ConsistencyError("final remainder " + std::to_string(s) + " is negative");
      }
      a_star_(p, column) = std::sqrt(std::max(s, 0.0));
      remaining_.clear();
      m_.resize(0, 0);
      return;
    }

    if (m_(i, i) <= zero_tol_) {
      d_values_.push_back(0.0);
      ++zero_margin_steps_;
      m_ = drop_index(m_, i);
    } else {
      auto step = peel_cleaned(m_, i, zero_tol_, neg_floor_, opts_);
      d_values_.push_back(step.d_value);
      if (step.unpeelable) degenerate_ = true;
      if (step.boundary) ++boundary_steps_;
      for (std::size_t r = 0; r < remaining_.size(); ++r) {
        a_star_(remaining_[r], column) = step.tau(static_cast<Index>(r));
      }
      m_ = std::move(step.reduced);
    }
    remaining_.erase(it);
    clean_small(m_, zero_tol_);
  }

  DecompositionResult finish(const TailMatrix& sigma) && {
    DecompositionResult res;
    res.path = std::move(path_);
    res.alpha = sigma.alpha();
    res.a_star = std::move(a_star_);
    res.a = sigma.alpha() == 2.0 ? res.a_star : entrywise_power(res.a_star, 2.0 / sigma.alpha());
    res.d_values = std::move(d_values_);
    res.frobenius_gap = frobenius_gap(sigma.sigma(), res.a_star);
    res.degenerate = degenerate_;
    res.exact = !degenerate_ && res.frobenius_gap <= opts_.exact_tol;
    res.boundary_steps = boundary_steps_;
    res.zero_margin_steps = zero_margin_steps_;
    return res;
  }

 private:
  DecompositionOptions opts_;
  Matrix m_;
  Index d_;
  double zero_tol_ = 0.0;
  double neg_floor_ = 0.0;
  std::vector<Index> remaining_;
  std::vector<Index> path_;
  Matrix a_star_;
  std::vector<double> d_values_;
  bool degenerate_ = false;
  std::size_t boundary_steps_ = 0;
  std::size_t zero_margin_steps_ = 0;
};

void check_path(const std::vector<Index>& path, Index d) {
  if (static_cast<Index>(path.size()) != d) throw ArgumentError("path length must equal dimension");
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (Index p : path) {
    if (p < 0 || p >= d || seen[static_cast<std::size_t>(p)]) {
      throw ArgumentError("path must be a permutation of the dimensions");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
}

std::vector<Index> admissible(const PathState& state, double tol_d) {
  const auto ds = state.ratios();
  std::vector<Index> out;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (ds[r] <= 1.0 + tol_d) out.push_back(state.remaining()[r]);
  }
  return out;
}

// One pragmatic walk; returns the path if it completed.
std::optional<std::vector<Index>> pragmatic_walk(const TailMatrix& sigma, std::uint64_t seed,
                                                 std::uint64_t restart,
                                                 const DecompositionOptions& opts) {
  const CounterRng rng(seed, kPragmaticStream);
  PathState state(sigma.sigma(), opts);
  std::vector<Index> path;
  std::uint32_t step = 0;
  while (state.left() > 0) {
    Index pick = state.remaining().front();
    if (state.left() > 1) {
      const auto options = admissible(state, opts.tol_d);
      if (options.empty()) return std::nullopt;
      pick = options[rng.below(options.size(), restart, step)];
    }
    state.advance(pick);
    path.push_back(pick);
    ++step;
  }
  return path;
}

}  // namespace

DependenceRatio dependence_ratio(const Matrix& sigma, Index i, double zero_tol) {
  if (sigma.rows() != sigma.cols()) throw ArgumentError("matrix must be square");
  if (sigma.rows() < 2) throw ArgumentError("dependence ratio needs dimension at least 2");
  if (i < 0 || i >= sigma.rows()) throw ArgumentError("index out of range");
  if (sigma(i, i) <= zero_tol) {
    throw DomainError("degenerate margin: diagonal entry " + std::to_string(i) + " is zero");
  }
  return ratio_of(sigma, i, zero_tol);
}

DependenceRatio dependence_ratio(const TailMatrix& sigma, Index i, double zero_tol) {
  return dependence_ratio(sigma.sigma(), i, zero_tol);
}

PeelStep peel(const Matrix& sigma, Index i, const DecompositionOptions& opts) {
  const double scale = sigma.cwiseAbs().maxCoeff();
  const double zero_tol = opts.zero_tol_rel * scale;
  Matrix m = sigma;
  clean_small(m, zero_tol);
  dependence_ratio(m, i, zero_tol);  // argument and margin checks
  return peel_cleaned(m, i, zero_tol, -opts.neg_tol_rel * scale, opts);
}

PeelStep peel(const TailMatrix& sigma, Index i, const DecompositionOptions& opts) {
  return peel(sigma.sigma(), i, opts);
}

double DecompositionResult::max_d() const {
  double m = 0.0;
  for (double v : d_values) m = std::max(m, v);
  return m;
}

bool DecompositionResult::steps_below_one(double tol_d) const {
  return std::all_of(d_values.begin(), d_values.end(),
                     [tol_d](double v) { return v < 1.0 || std::abs(v - 1.0) <= tol_d; });
}

double frobenius_gap(const Matrix& sigma, const Matrix& a_star) {
  if (sigma.rows() != sigma.cols() || a_star.rows() != sigma.rows()) {
    throw ArgumentError("dimension mismatch between TPDM and factor");
  }
  return (sigma - a_star * a_star.transpose()).norm();
}

Matrix prune_zero_columns(const Matrix& a_star, double tol_col) {
  if (a_star.size() == 0) return a_star;
  if (tol_col < 0.0) tol_col = 1e-10 * a_star.maxCoeff();
  std::vector<Index> keep;
  for (Index c = 0; c < a_star.cols(); ++c) {
    if (a_star.col(c).maxCoeff() > tol_col) keep.push_back(c);
  }
  Matrix out(a_star.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) out.col(static_cast<Index>(c)) = a_star.col(keep[c]);
  return out;
}

MaxLinearModel to_model(const DecompositionResult& result) {
  const Matrix kept = prune_zero_columns(result.a, 0.0);
  if (kept.cols() == 0) throw DomainError("decomposition has no nonzero column");
  return MaxLinearModel(kept, result.alpha);
}

DecompositionResult decompose_along_path(const TailMatrix& sigma, const std::vector<Index>& path,
                                         const DecompositionOptions& opts) {
  check_path(path, sigma.dim());
  PathState state(sigma.sigma(), opts);
  for (Index p : path) state.advance(p);
  return std::move(state).finish(sigma);
}

DecompositionResult search_simple(const TailMatrix& sigma, const DecompositionOptions& opts) {
  PathState state(sigma.sigma(), opts);
  while (state.left() > 0) {
    const auto ds = state.ratios();
    const auto best = std::min_element(ds.begin(), ds.end()) - ds.begin();
    state.advance(state.remaining()[static_cast<std::size_t>(best)]);
  }
  return std::move(state).finish(sigma);
}

std::vector<DecompositionResult> search_exhaustive(const TailMatrix& sigma,
                                                   std::size_t max_results,
                                                   const DecompositionOptions& opts,
                                                   Index max_dim) {
  if (sigma.dim() > max_dim) {
    throw ArgumentError("exhaustive search limited to dimension " + std::to_string(max_dim));
  }
  std::vector<DecompositionResult> found;
  if (max_results == 0) return found;

  struct Frame {
    PathState state;
    std::vector<Index> path;
  };
  // Recursive lambda over copies of the state; depth is at most d.
  auto visit = [&](auto&& self, const Frame& frame) -> void {
    if (found.size() >= max_results) return;
    if (frame.state.left() <= 1) {
      auto path = frame.path;
      if (frame.state.left() == 1) path.push_back(frame.state.remaining().front());
      auto res = decompose_along_path(sigma, path, opts);
      if (res.exact) found.push_back(std::move(res));
      return;
    }
    for (Index p : admissible(frame.state, opts.tol_d)) {
      Frame child = frame;
      child.state.advance(p);
      child.path.push_back(p);
      self(self, child);
      if (found.size() >= max_results) return;
    }
  };
  visit(visit, Frame{PathState(sigma.sigma(), opts), {}});
  return found;
}

PragmaticResult search_pragmatic(const TailMatrix& sigma, std::uint64_t seed,
                                 std::size_t max_restarts, const DecompositionOptions& opts) {
  if (max_restarts < 1) throw ArgumentError("max_restarts must be at least 1");
  PragmaticResult out;
  for (std::size_t r = 0; r < max_restarts; ++r) {
    out.restarts = r + 1;
    const auto path = pragmatic_walk(sigma, seed, r, opts);
    if (!path) continue;
    auto res = decompose_along_path(sigma, *path, opts);
    if (res.exact) {
      out.result = std::move(res);
      break;
    }
  }
  return out;
}

PragmaticCollection collect_pragmatic(const TailMatrix& sigma, std::size_t n_wanted,
                                      std::uint64_t seed, std::size_t max_restarts,
                                      const DecompositionOptions& opts, const Exec& exec) {
  if (n_wanted < 1) throw ArgumentError("number of decompositions must be at least 1");
  if (max_restarts < 1) throw ArgumentError("max_restarts must be at least 1");
  PragmaticCollection out;
  std::vector<std::vector<Index>> seen;
  for (std::size_t first = 0; first < max_restarts && out.results.size() < n_wanted;
       first += kPragmaticBatch) {
    const std::size_t count = std::min(kPragmaticBatch, max_restarts - first);
    std::vector<std::optional<DecompositionResult>> batch(count);
    std::vector<bool> dead(count, false);
    for_each_chunk(count, exec, [&](std::size_t b) {
      const auto path = pragmatic_walk(sigma, seed, first + b, opts);
      if (!path) {
        dead[b] = true;
        return;
      }
      auto res = decompose_along_path(sigma, *path, opts);
      if (res.exact) batch[b] = std::move(res);
    });
    for (std::size_t b = 0; b < count && out.results.size() < n_wanted; ++b) {
      ++out.restarts;
      if (dead[b]) ++out.dead_ends;
      if (!batch[b]) continue;
      if (std::find(seen.begin(), seen.end(), batch[b]->path) != seen.end()) {
        ++out.duplicates;
        continue;
      }
      seen.push_back(batch[b]->path);
      out.results.push_back(std::move(*batch[b]));
    }
  }
  return out;
}

PathCensus enumerate_all_paths(const TailMatrix& sigma, const DecompositionOptions& opts,
                               double gap_threshold, const Exec& exec) {
  const Index d = sigma.dim();
  if (d > 8) throw ArgumentError("path enumeration limited to dimension 8");
  std::vector<std::vector<Index>> paths;
  std::vector<Index> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), Index{0});
  do {
    paths.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  PathCensus census;
  census.gap_threshold = gap_threshold;
  census.total = paths.size();
  census.results.resize(paths.size());
  for_each_chunk(paths.size(), exec, [&](std::size_t p) {
    census.results[p] = decompose_along_path(sigma, paths[p], opts);
  });
  for (const auto& res : census.results) {
    if (res.degenerate) continue;
    ++census.usable;
    auto& part = census.by_columns[prune_zero_columns(res.a_star).cols()];
    ++part.usable;
    if (res.exact) {
      ++census.exact;
      ++part.exact;
    }
    if (res.frobenius_gap <= gap_threshold) {
      ++census.within_gap;
      ++part.within_gap;
    }
  }
  return census;
}

}  // namespace exdep
