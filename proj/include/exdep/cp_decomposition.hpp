#pragma once

// Iterative approximate completely positive decomposition of a TPDM:
// single peel steps, decomposition along a path and the path searches.

#include "exdep/common.hpp"
#include "exdep/max_linear.hpp"
#include "exdep/tpdm.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace exdep {

struct DecompositionOptions {
  double tol_d = 1e-9;          ///< |D - 1| <= tol_d counts as a boundary step
  double exact_tol = 1e-12;     ///< Frobenius gap below which a result is exact
  double zero_tol_rel = 1e-12;  ///< entries below this times max|Sigma| are zero
  double neg_tol_rel = 1e-8;    ///< allowed negative rounding in remainders
};

struct DependenceRatio {
  double value = 0.0;  ///< D_i, possibly +inf
  Index j = -1;        ///< argmax pair, -1 when every term vanished
  Index k = -1;
};

/// D_i = max_{j,k != i} s_ji s_ki / (s_jk s_ii). Terms with a zero numerator
/// are 0; a positive numerator against s_jk = 0 gives +inf. Entries with
/// magnitude <= zero_tol are treated as 0.
DependenceRatio dependence_ratio(const Matrix& sigma, Index i, double zero_tol = 0.0);
DependenceRatio dependence_ratio(const TailMatrix& sigma, Index i, double zero_tol = 0.0);

struct PeelStep {
  Index index = 0;
  double d_value = 0.0;
  Index arg_j = -1;
  Index arg_k = -1;
  Vector tau;        ///< length d', tau(index) is the diagonal entry
  Matrix reduced;    ///< (d'-1) x (d'-1) remainder
  bool boundary = false;    ///< |D - 1| <= tol_d
  bool unpeelable = false;  ///< D = +inf
};

/// One peel of dimension i. At D = +inf the column is sqrt(s_ii) e_i and the
/// remainder is Sigma without row and column i.
PeelStep peel(const Matrix& sigma, Index i, const DecompositionOptions& opts = {});
PeelStep peel(const TailMatrix& sigma, Index i, const DecompositionOptions& opts = {});

struct DecompositionResult {
  std::vector<Index> path;
  Matrix a_star;                 ///< column s holds the step-s factor
  Matrix a;                      ///< a_star^(2/alpha)
  std::vector<double> d_values;  ///< one per peel before the final 1x1 remainder
  double frobenius_gap = 0.0;
  double alpha = 2.0;
  bool exact = false;
  bool degenerate = false;       ///< some step had D = +inf
  std::size_t boundary_steps = 0;
  std::size_t zero_margin_steps = 0;

  double max_d() const;
  /// Every step had D < 1, boundary steps included.
  bool steps_below_one(double tol_d) const;
};

double frobenius_gap(const Matrix& sigma, const Matrix& a_star);

/// Drops columns whose largest entry is <= tol_col; negative tol_col means
/// 1e-10 times the largest entry of the matrix.
Matrix prune_zero_columns(const Matrix& a_star, double tol_col = -1.0);

/// Max-linear model (A, alpha) of a result with its zero columns removed.
MaxLinearModel to_model(const DecompositionResult& result);

DecompositionResult decompose_along_path(const TailMatrix& sigma, const std::vector<Index>& path,
                                         const DecompositionOptions& opts = {});

/// Greedy: always peel the remaining dimension with the lowest D (ties: lowest index).
DecompositionResult search_simple(const TailMatrix& sigma, const DecompositionOptions& opts = {});

/// Depth-first search over T = {i : D_i <= 1 + tol_d}; returns exact results
/// in lexicographic path order.
std::vector<DecompositionResult> search_exhaustive(const TailMatrix& sigma,
                                                   std::size_t max_results,
                                                   const DecompositionOptions& opts = {},
                                                   Index max_dim = 10);

struct PragmaticResult {
  std::optional<DecompositionResult> result;
  std::size_t restarts = 0;  ///< walks started, including the successful one
  bool found() const { return result.has_value(); }
};

/// Random walk over T with uniform choices; restart r draws from (seed, r).
PragmaticResult search_pragmatic(const TailMatrix& sigma, std::uint64_t seed,
                                 std::size_t max_restarts,
                                 const DecompositionOptions& opts = {});

struct PragmaticCollection {
  std::vector<DecompositionResult> results;  ///< distinct by path, in restart order
  std::size_t restarts = 0;
  std::size_t dead_ends = 0;
  std::size_t duplicates = 0;
};

/// Up to n_wanted distinct exact results from restarts 0, 1, ... of the same
/// walks as search_pragmatic. Independent of the thread count.
PragmaticCollection collect_pragmatic(const TailMatrix& sigma, std::size_t n_wanted,
                                      std::uint64_t seed, std::size_t max_restarts,
                                      const DecompositionOptions& opts = {},
                                      const Exec& exec = {});

struct ColumnPartition {
  std::size_t usable = 0;
  std::size_t exact = 0;
  std::size_t within_gap = 0;
};

struct PathCensus {
  std::vector<DecompositionResult> results;  ///< all d! paths, lexicographic
  std::size_t total = 0;
  std::size_t usable = 0;
  std::size_t exact = 0;
  std::size_t within_gap = 0;
  double gap_threshold = 5.0;
  /// Keyed by number of nonzero columns, usable paths only.
  std::map<Index, ColumnPartition> by_columns;
};

PathCensus enumerate_all_paths(const TailMatrix& sigma, const DecompositionOptions& opts = {},
                               double gap_threshold = 5.0, const Exec& exec = {});

}  // namespace exdep
