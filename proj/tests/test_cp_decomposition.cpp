#include "exdep/cp_decomposition.hpp"
#include "exdep/fixtures.hpp"
#include "exdep/max_linear.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace exdep;

namespace {

TailMatrix sigma_of(const Matrix& a, double alpha) { return TailMatrix(a * a.transpose(), alpha); }

double brute_ratio(const Matrix& s, Index i) {
  double best = 0.0;
  for (Index j = 0; j < s.rows(); ++j) {
    for (Index k = 0; k < s.rows(); ++k) {
      if (j == i || k == i) continue;
      best = std::max(best, s(j, i) * s(k, i) / (s(j, k) * s(i, i)));
    }
  }
  return best;
}

// Greedy search ends with min D > 1 on this matrix; no exact path exists.
Matrix greedy_inexact_fixture() {
  Matrix b(4, 4);
  b << 0.5, 0.0, 0.25, 0.25,
       0.5, 0.0, 0.75, 0.25,
       0.25, 0.5, 0.5, 0.25,
       1.0, 1.0, 0.5, 0.75;
  return b * b.transpose();
}

// Sigma_1 with sigma_44 lowered by 1.5: still PSD, no exact path.
Matrix deflated_fixture() {
  const Matrix a = synthetic_a1();
  Matrix s = a * a.transpose();
  s(3, 3) -= 1.5;
  return s;
}

bool same_columns(const Matrix& x, const Matrix& y, double tol) {
  if (x.cols() != y.cols() || x.rows() != y.rows()) return false;
  std::vector<bool> used(static_cast<std::size_t>(y.cols()), false);
  for (Index c = 0; c < x.cols(); ++c) {
    bool hit = false;
    for (Index k = 0; k < y.cols() && !hit; ++k) {
      if (!used[static_cast<std::size_t>(k)] && (x.col(c) - y.col(k)).cwiseAbs().maxCoeff() <= tol) {
        used[static_cast<std::size_t>(k)] = hit = true;
      }
    }
    if (!hit) return false;
  }
  return true;
}

std::vector<Index> canonical(Index d) {
  std::vector<Index> p(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = i;
  return p;
}

}  // namespace

TEST_CASE("dependence ratio") {
  const double rho = 0.6;
  Matrix s(2, 2);
  s << 1, rho, rho, 1;
  CHECK(dependence_ratio(s, 0).value == doctest::Approx(rho * rho));

  const auto id = dependence_ratio(Matrix::Identity(4, 4), 2);
  CHECK(id.value == 0.0);
  CHECK(id.j == -1);

  const Matrix s3 = synthetic_a3() * synthetic_a3().transpose();
  const auto r = dependence_ratio(s3, 0);
  CHECK(r.value == doctest::Approx(brute_ratio(s3, 0)).epsilon(1e-14));
  CHECK(r.value < 1.0);

  Matrix z = Matrix::Identity(3, 3);
  z(1, 1) = 0.0;
  CHECK_THROWS_AS(dependence_ratio(z, 1), DomainError);
  CHECK_THROWS_AS(dependence_ratio(Matrix::Identity(1, 1), 0), ArgumentError);

  SUBCASE("zero convention and lexicographic ties") {
    Matrix t(3, 3);
    t << 1, 0.5, 0.5,
         0.5, 1, 0,
         0.5, 0, 1;
    const auto inf = dependence_ratio(t, 0);
    CHECK(std::isinf(inf.value));
    CHECK(inf.j == 1);
    CHECK(inf.k == 2);
    const auto tie = dependence_ratio(Matrix::Constant(3, 3, 1.0), 2);
    CHECK(tie.value == 1.0);
    CHECK(tie.j == 0);
    CHECK(tie.k == 0);
  }
}

TEST_CASE("single peel") {
  const double rho = 0.6;
  Matrix s(2, 2);
  s << 1, rho, rho, 1;
  const auto step = peel(s, 0);
  CHECK(step.tau(0) == doctest::Approx(1.0));
  CHECK(step.tau(1) == doctest::Approx(rho));
  REQUIRE(step.reduced.rows() == 1);
  CHECK(step.reduced(0, 0) == doctest::Approx(1.0 - rho * rho));
  const Matrix l = s.llt().matrixL();
  CHECK(step.tau(1) == doctest::Approx(l(1, 0)));
  CHECK(std::sqrt(step.reduced(0, 0)) == doctest::Approx(l(1, 1)));

  const auto idp = peel(Matrix::Identity(3, 3), 1);
  CHECK(idp.tau == Vector::Unit(3, 1));
  CHECK(idp.reduced == Matrix::Identity(2, 2));

  SUBCASE("three-dimensional structure") {
    const Matrix a3 = synthetic_a3();
    const Matrix sig = (a3 * a3.transpose()).topLeftCorner(3, 3);
    const auto p = peel(sig, 0);
    const double c = sig(0, 0) * std::max(p.d_value, 1.0);
    CHECK(p.reduced(0, 0) == doctest::Approx(sig(1, 1) - sig(0, 1) * sig(0, 1) / c));
    CHECK(p.reduced(0, 1) == doctest::Approx(sig(1, 2) - sig(0, 1) * sig(0, 2) / c));
    CHECK(p.reduced(1, 1) == doctest::Approx(sig(2, 2) - sig(0, 2) * sig(0, 2) / c));
    CHECK(p.tau.minCoeff() >= 0.0);
  }
  SUBCASE("D above one inflates the diagonal") {
    Matrix t(3, 3);
    t << 1.0, 0.9, 0.9,
         0.9, 1.0, 0.5,
         0.9, 0.5, 1.0;
    const auto p = peel(t, 0);
    CHECK(p.d_value == doctest::Approx(0.81 / 0.5));
    CHECK(p.tau(0) == doctest::Approx(std::sqrt(p.d_value)));
    CHECK(p.reduced(0, 1) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("frobenius gap and column pruning") {
  CHECK(frobenius_gap(Matrix::Identity(2, 2), Matrix::Zero(2, 2)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(prune_zero_columns(Matrix::Identity(4, 4)).cols() == 4);
  Vector a(3);
  a << 1.0, 2.0, 0.5;
  const auto res = decompose_along_path(TailMatrix(a * a.transpose(), 2.0), {1, 0, 2});
  const Matrix kept = prune_zero_columns(res.a_star);
  REQUIRE(kept.cols() == 1);
  CHECK((kept.col(0) - a).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("decomposition along a path") {
  SUBCASE("identity") {
    const auto res = decompose_along_path(TailMatrix(Matrix::Identity(4, 4), 2.0), {2, 0, 3, 1});
    CHECK(res.exact);
    CHECK(same_columns(res.a_star, Matrix::Identity(4, 4), 0.0));
  }
  SUBCASE("Sigma_3 canonical path recovers A_3") {
    const Matrix a3 = synthetic_a3();
    const auto res = decompose_along_path(sigma_of(a3, 4.0), canonical(5));
    CHECK(res.exact);
    CHECK(res.frobenius_gap <= 1e-12);
    const Matrix kept = prune_zero_columns(res.a_star);
    CHECK(kept.cols() == 3);
    CHECK((kept - a3).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((res.a - res.a_star.cwiseSqrt()).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("zero pattern of the factor") {
    std::mt19937_64 rng(17);
    const Matrix b = testing::random_nonnegative(rng, 6, 6);
    const auto path = testing::random_permutation(rng, 6);
    const auto res = decompose_along_path(sigma_of(b, 2.0), path);
    for (std::size_t c = 0; c < path.size(); ++c) {
      for (std::size_t r = 0; r < c; ++r) CHECK(res.a_star(path[r], static_cast<Index>(c)) == 0.0);
    }
    CHECK(res.a == res.a_star);
  }
  SUBCASE("rejects non-permutations") {
    const TailMatrix id(Matrix::Identity(3, 3), 2.0);
    CHECK_THROWS_AS(decompose_along_path(id, {0, 0, 1}), ArgumentError);
    CHECK_THROWS_AS(decompose_along_path(id, {0, 1}), ArgumentError);
  }
}

TEST_CASE("dense random matrices keep off-diagonals on every path") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const Matrix b = testing::random_nonnegative(rng, 4, 4) + Matrix::Constant(4, 4, 0.05);
    const TailMatrix s = sigma_of(b, 2.0);
    const auto census = enumerate_all_paths(s);
    CHECK(census.total == 24);
    CHECK(census.usable > 0);
    for (const auto& res : census.results) {
      if (res.degenerate) continue;
      const Matrix rec = res.a_star * res.a_star.transpose();
      for (Index j = 0; j < 4; ++j) {
        CHECK(rec(j, j) >= s(j, j) - 1e-10);
        for (Index k = 0; k < 4; ++k) {
          if (j != k) CHECK(std::abs(rec(j, k) - s(j, k)) <= 1e-10 * std::max(1.0, s(j, k)));
        }
      }
    }
  }
}

TEST_CASE("lower-triangular recovery") {
  std::mt19937_64 rng(8);
  for (double alpha : {1.0, 2.0, 4.0}) {
    for (int t = 0; t < 20; ++t) {
      const Matrix a = testing::random_lower_triangular(rng, 5);
      const Matrix a_star = entrywise_power(a, alpha / 2.0);
      const auto res = decompose_along_path(sigma_of(a_star, alpha), canonical(5));
      CHECK((res.a_star - a_star).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK((res.a - a).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(res.max_d() <= 1.0 + 1e-9);
      CHECK(res.exact);
    }
  }
}

TEST_CASE("exactness agrees with all steps below one") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(3, 6);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index d = dim(rng);
    const Matrix b = testing::random_nonnegative(rng, d, d + 1, 0.15);
    const Matrix s = b * b.transpose();
    if (s.diagonal().minCoeff() <= 0.0) continue;
    const auto res = decompose_along_path(TailMatrix(s, 2.0), testing::random_permutation(rng, d));
    if (res.degenerate) continue;
    ++checked;
    const bool below = res.steps_below_one(1e-9);
    CHECK(below == (res.frobenius_gap <= 1e-12));
    CHECK(res.exact == (res.frobenius_gap <= 1e-12));
  }
  CHECK(checked > 500);
}

TEST_CASE("remainders stay nonnegative and PSD along random paths") {
  std::mt19937_64 rng(123);
  for (int t = 0; t < 200; ++t) {
    const Index d = 3 + static_cast<Index>(t % 5);
    const Matrix b = testing::random_nonnegative(rng, d, d) + Matrix::Constant(d, d, 0.02);
    Matrix m = b * b.transpose();
    const double scale = m.maxCoeff();
    auto path = testing::random_permutation(rng, d);
    std::vector<Index> remaining = canonical(d);
    for (std::size_t s = 0; s + 1 < path.size(); ++s) {
      const auto pos = std::find(remaining.begin(), remaining.end(), path[s]) - remaining.begin();
      const auto step = peel(m, pos);
      if (m.rows() == 2) CHECK(step.d_value <= 1.0 + 1e-12);
      if (std::abs(step.d_value - 1.0) > 1e-9) {
        CHECK(step.reduced.minCoeff() >= -1e-12 * scale);
        const double tr = std::max(step.reduced.trace(), 1e-300);
        Eigen::SelfAdjointEigenSolver<Matrix> es(step.reduced, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9 * tr);
      }
      m = step.reduced;
      remaining.erase(remaining.begin() + pos);
    }
  }
}

TEST_CASE("simple search") {
  std::mt19937_64 rng(41);
  int exact = 0;
  for (int t = 0; t < 200; ++t) {
    const Matrix a = testing::random_lower_triangular(rng, 6);
    exact += search_simple(sigma_of(a, 2.0)).exact;
  }
  // greedy is not complete: two of these 200 end above D = 1
  CHECK(exact == 198);
  const auto id = search_simple(TailMatrix(Matrix::Identity(5, 5), 2.0));
  CHECK(id.exact);
  CHECK(id.a_star == Matrix::Identity(5, 5));

  const auto greedy = search_simple(TailMatrix(greedy_inexact_fixture(), 2.0));
  CHECK_FALSE(greedy.exact);
  CHECK_FALSE(greedy.degenerate);
  CHECK(greedy.frobenius_gap > 1e-3);
  CHECK(greedy.max_d() > 1.0);
}

TEST_CASE("exhaustive search") {
  const auto s3 = search_exhaustive(sigma_of(synthetic_a3(), 4.0), 1000);
  CHECK(s3.size() >= 24);
  for (const auto& r : s3) CHECK(r.exact);

  const auto id = search_exhaustive(TailMatrix(Matrix::Identity(3, 3), 2.0), 100);
  CHECK(id.size() == 6);

  Vector a(4);
  a << 0.5, 1.0, 1.5, 2.0;
  const auto rank1 = search_exhaustive(TailMatrix(a * a.transpose(), 2.0), 100);
  CHECK(rank1.size() == 24);
  for (const auto& r : rank1) {
    const Matrix kept = prune_zero_columns(r.a_star);
    REQUIRE(kept.cols() == 1);
    CHECK((kept.col(0) - a).cwiseAbs().maxCoeff() <= 1e-12);
  }

  CHECK(search_exhaustive(TailMatrix(greedy_inexact_fixture(), 2.0), 100).empty());
  CHECK(search_exhaustive(TailMatrix(deflated_fixture(), 4.0), 100).empty());
  CHECK(search_exhaustive(sigma_of(synthetic_a3(), 4.0), 5).size() == 5);
  CHECK_THROWS_AS(search_exhaustive(TailMatrix(Matrix::Identity(11, 11), 2.0), 1), ArgumentError);
}

TEST_CASE("pragmatic search") {
  const auto id = search_pragmatic(TailMatrix(Matrix::Identity(4, 4), 2.0), 1, 1);
  CHECK(id.found());
  CHECK(id.restarts == 1);

  const auto s1 = search_pragmatic(sigma_of(synthetic_a1(), 4.0), 2024, 50);
  CHECK(s1.found());
  CHECK(s1.restarts <= 50);
  CHECK(s1.result->exact);

  const auto again = search_pragmatic(sigma_of(synthetic_a1(), 4.0), 2024, 50);
  CHECK(again.result->path == s1.result->path);

  const auto none = search_pragmatic(TailMatrix(deflated_fixture(), 4.0), 5, 200);
  CHECK_FALSE(none.found());
  CHECK(none.restarts == 200);
  CHECK_THROWS_AS(search_pragmatic(TailMatrix(Matrix::Identity(2, 2), 2.0), 1, 0), ArgumentError);
}

TEST_CASE("collecting pragmatic results") {
  const TailMatrix s3 = sigma_of(synthetic_a3(), 4.0);
  const auto one = collect_pragmatic(s3, 200, 7, 5000, {}, Exec{1});
  const auto many = collect_pragmatic(s3, 200, 7, 5000, {}, Exec{8});
  REQUIRE(one.results.size() == many.results.size());
  CHECK(one.restarts == many.restarts);
  for (std::size_t i = 0; i < one.results.size(); ++i) {
    CHECK(one.results[i].path == many.results[i].path);
    CHECK(one.results[i].a_star == many.results[i].a_star);
  }
  // every exact path of Sigma_3 is reachable, and there are 24 of them
  CHECK(one.results.size() == 24);
  CHECK(one.duplicates > 0);
  for (std::size_t i = 0; i < one.results.size(); ++i) {
    for (std::size_t j = i + 1; j < one.results.size(); ++j) {
      CHECK(one.results[i].path != one.results[j].path);
    }
  }
  const auto few = collect_pragmatic(s3, 3, 7, 5000);
  CHECK(few.results.size() == 3);
  CHECK(few.results[0].path == one.results[0].path);
}

TEST_CASE("path enumeration on the bundled matrices") {
  const std::size_t exact[] = {12, 16, 24};
  const std::size_t within[] = {58, 72, 76};
  const auto fixtures = synthetic_fixtures();
  for (std::size_t f = 0; f < 3; ++f) {
    const auto census = enumerate_all_paths(sigma_of(fixtures[f].a, 4.0), {}, 5.0, Exec{4});
    CHECK(census.total == 120);
    CHECK(census.exact == exact[f]);
    CHECK(census.within_gap == within[f]);
    std::size_t degenerate = 0;
    for (const auto& r : census.results) degenerate += r.degenerate;
    CHECK(census.usable + degenerate == 120);
  }
  const auto a3 = enumerate_all_paths(sigma_of(synthetic_a3(), 4.0));
  CHECK(a3.by_columns.at(3).exact == 24);
  CHECK(a3.by_columns.at(4).within_gap == 40);
  CHECK_THROWS_AS(enumerate_all_paths(TailMatrix(Matrix::Identity(9, 9), 2.0)), ArgumentError);
}

TEST_CASE("round trip through a model") {
  std::mt19937_64 rng(55);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = testing::random_lower_triangular(rng, 5);
    const MaxLinearModel m(a, 3.0);
    const TailMatrix s = tpdm_of_model(m);
    const auto found = search_exhaustive(s, 3);
    REQUIRE_FALSE(found.empty());
    for (const auto& r : found) {
      const MaxLinearModel back = to_model(r);
      CHECK((tpdm_of_model(back).sigma() - s.sigma()).norm() <= 1e-10);
      Matrix shuffled = back.coefficients();
      if (shuffled.cols() > 1) shuffled.col(0).swap(shuffled.col(shuffled.cols() - 1));
      CHECK((tpdm_of_model(MaxLinearModel(shuffled, 3.0)).sigma() - s.sigma()).norm() <= 1e-10);
    }
  }
}
