#include "exdep/max_linear.hpp"
#include "exdep/tpdm.hpp"
#include "exdep/fixtures.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace exdep;

TEST_CASE("validate_tpdm") {
  CHECK(validate_tpdm(Matrix::Identity(3, 3)).valid());
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  const auto v = validate_tpdm(bad);
  CHECK_FALSE(v.psd);
  CHECK(v.min_eigenvalue == doctest::Approx(-1.0));
  const Matrix a1 = synthetic_a1();
  CHECK(validate_tpdm(a1 * a1.transpose()).valid());

  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const Matrix b = testing::random_nonnegative(rng, 6, 4, 0.3);
    CHECK(validate_tpdm(b * b.transpose()).valid());
  }
}

TEST_CASE("TailMatrix rejects invalid input") {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(TailMatrix(asym, 2.0), DomainError);
  Matrix neg(2, 2);
  neg << 1, -0.5, -0.5, 1;
  CHECK_THROWS_AS(TailMatrix(neg, 2.0), DomainError);
  CHECK_THROWS_AS(TailMatrix(Matrix::Identity(2, 3), 2.0), ArgumentError);
  CHECK_THROWS_AS(TailMatrix(Matrix::Identity(2, 2), 0.0), ArgumentError);
  CHECK(TailMatrix(Matrix::Identity(3, 3), 2.0).mass() == 3.0);
}

TEST_CASE("polar transform") {
  Matrix x(4, 3);
  x << 3, 4, 0,
       0, 1, 0,
       0, 0, 0,
       1, 1, 1;
  const auto p2 = polar_transform(x.topRows(2).leftCols(2), 2.0);
  CHECK(p2.radii(0) == doctest::Approx(5.0));
  CHECK(p2.angles(0, 0) == doctest::Approx(0.6));
  CHECK(p2.angles(0, 1) == doctest::Approx(0.8));

  const auto p4 = polar_transform(x, 4.0);
  CHECK(p4.dropped_zero_rows == 1);
  CHECK(p4.input_rows == 4);
  REQUIRE(p4.radii.size() == 3);
  CHECK(p4.radii(1) == 1.0);
  CHECK(p4.angles(1, 1) == 1.0);
  CHECK(p4.radii(2) == doctest::Approx(std::pow(3.0, 0.25)));
  CHECK(p4.angles(2, 0) == doctest::Approx(std::pow(3.0, -0.25)));
  for (Index i = 0; i < 3; ++i) {
    CHECK(lalpha_norm(p4.angles.row(i).transpose(), 4.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(polar_transform(-x, 2.0), DomainError);
}

TEST_CASE("mass and TPDM estimates") {
  SUBCASE("all radii equal leaves no exceedance") {
    const Matrix x = Matrix::Ones(10, 2);
    CHECK_THROWS_AS(estimate_mass(polar_transform(x, 2.0), 0.9), EstimationError);
  }
  SUBCASE("single exceedance along e1") {
    Matrix x = Matrix::Ones(10, 2) * 0.5;
    x(3, 0) = 10.0;
    x(3, 1) = 0.0;
    const auto polar = polar_transform(x, 2.0);
    const auto mass = estimate_mass(polar, 0.9);
    CHECK(mass.n_exc == 1);
    const auto est = estimate_tpdm(polar, mass);
    const double expect = mass.r0 * mass.r0 / 10.0;
    CHECK(est.matrix(0, 0) == doctest::Approx(expect));
    CHECK(est.matrix(0, 1) == 0.0);
    CHECK(est.matrix(1, 1) == 0.0);
    const Matrix f = empirical_factor(polar, mass);
    CHECK(f.cols() == 1);
    CHECK((f * f.transpose() - est.matrix.sigma()).norm() <= 1e-12);
  }
  SUBCASE("duplicated columns") {
    std::mt19937_64 rng(4);
    const auto s = testing::pareto_sample(rng, 1000, 2.0);
    Matrix x(1000, 2);
    for (Index i = 0; i < 1000; ++i) x(i, 0) = x(i, 1) = s[static_cast<std::size_t>(i)];
    const auto polar = polar_transform(x, 2.0);
    const auto est = estimate_tpdm(polar, estimate_mass(polar, 0.95)).matrix;
    CHECK(std::abs(est(0, 0) - est(0, 1)) <= 1e-12 * est(0, 0));
    CHECK(std::abs(est(1, 1) - est(0, 1)) <= 1e-12 * est(0, 0));
  }
}

TEST_CASE("TPDM estimate from a simulated max-linear model") {
  // Unit marginal scales so that standardized-scale entries are comparable.
  Matrix a = synthetic_a3();
  for (Index j = 0; j < a.rows(); ++j) a.row(j) /= a.row(j).norm();
  const MaxLinearModel model(a, 2.0);
  const Matrix y = simulate(model, 100000, 77);
  const auto polar = polar_transform(y, 2.0);
  const auto mass = estimate_mass(polar, 0.95);
  const auto est = estimate_tpdm(polar, mass, Exec{4});
  const Matrix truth = tpdm_of_model(model).sigma();
  CHECK(mass.m_hat == doctest::Approx(truth.trace()).epsilon(0.10));
  CHECK((est.matrix.sigma() - truth).cwiseAbs().maxCoeff() <= 0.15);
  CHECK(est.matrix.mass() == doctest::Approx(mass.m_hat).epsilon(1e-10));

  SUBCASE("reproducible across thread counts") {
    const auto one = estimate_tpdm(polar, mass, Exec{1});
    const auto many = estimate_tpdm(polar, mass, Exec{8});
    CHECK((one.matrix.sigma() - many.matrix.sigma()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("empirical factor reproduces the estimate") {
    const Matrix f = empirical_factor(polar, mass);
    CHECK(static_cast<std::size_t>(f.cols()) == mass.n_exc);
    CHECK((f * f.transpose() - est.matrix.sigma()).norm() <= 1e-12 * est.matrix.mass());
    const double col_norm = f.col(0).squaredNorm();
    CHECK(col_norm == doctest::Approx(mass.m_hat / static_cast<double>(mass.n_exc)).epsilon(1e-12));
  }
  SUBCASE("scale equivariance") {
    const auto scaled = polar_transform(3.0 * y, 2.0);
    const auto m2 = estimate_mass(scaled, 0.95);
    CHECK(m2.r0 == doctest::Approx(3.0 * mass.r0));
    // sigma scales with r0^alpha; rescaling r0 back leaves it unchanged
    const Matrix s2 = estimate_tpdm(scaled, m2).matrix.sigma() / 9.0;
    CHECK((s2 - est.matrix.sigma()).cwiseAbs().maxCoeff() <= 1e-12 * est.matrix.mass());
  }
  SUBCASE("permutation equivariance") {
    Matrix yp = y;
    yp.col(0).swap(yp.col(3));
    const auto pp = polar_transform(yp, 2.0);
    const Matrix sp = estimate_tpdm(pp, estimate_mass(pp, 0.95)).matrix.sigma();
    CHECK(std::abs(sp(3, 3) - est.matrix(0, 0)) <= 1e-12);
    CHECK(std::abs(sp(3, 1) - est.matrix(0, 1)) <= 1e-12);
    CHECK(std::abs(sp(0, 0) - est.matrix(3, 3)) <= 1e-12);
  }
  SUBCASE("stability table") {
    const auto table = mass_stability_table(polar);
    REQUIRE(table.size() == 40);
    CHECK(table.front().level == doctest::Approx(0.80));
    CHECK(table.back().level == doctest::Approx(0.995));
  }
}
