#include "exdep/max_linear.hpp"
#include "exdep/fixtures.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace exdep;

TEST_CASE("model validation") {
  CHECK_THROWS_AS(MaxLinearModel(Matrix::Zero(2, 2), 2.0), DomainError);
  Matrix neg = Matrix::Identity(2, 2);
  neg(0, 1) = -0.1;
  CHECK_THROWS_AS(MaxLinearModel(neg, 2.0), DomainError);
  CHECK_THROWS_AS(MaxLinearModel(Matrix::Identity(2, 2), -1.0), ArgumentError);
}

TEST_CASE("TPDM of a model") {
  CHECK(tpdm_of_model(MaxLinearModel(Matrix::Identity(3, 3), 2.0)).sigma() == Matrix::Identity(3, 3));

  const Matrix a3 = synthetic_a3();
  const auto sigma = tpdm_of_model(MaxLinearModel(a3, 4.0)).sigma();
  for (Index j = 0; j < 5; ++j) {
    for (Index k = 0; k < 5; ++k) {
      double s = 0.0;
      for (Index l = 0; l < 3; ++l) s += std::pow(a3(j, l), 2.0) * std::pow(a3(k, l), 2.0);
      CHECK(sigma(j, k) == doctest::Approx(s).epsilon(1e-14));
    }
  }
  CHECK(sigma(0, 0) == 1.0);

  Vector a(3);
  a << 1.0, 0.5, 2.0;
  const auto rank1 = tpdm_of_model(MaxLinearModel(a, 3.0)).sigma();
  const Vector root = a.array().pow(1.5).matrix();
  CHECK((rank1 - root * root.transpose()).norm() <= 1e-14);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Matrix b = testing::random_nonnegative(rng, 4, 6) + Matrix::Constant(4, 6, 0.01);
    const MaxLinearModel m(b, 1.5);
    CHECK(validate_tpdm(tpdm_of_model(m).sigma()).valid());
    Matrix permuted = b;
    permuted.col(0).swap(permuted.col(5));
    permuted.col(2).swap(permuted.col(3));
    CHECK((tpdm_of_model(MaxLinearModel(permuted, 1.5)).sigma() - tpdm_of_model(m).sigma())
              .norm() <= 1e-13);
  }
}

TEST_CASE("angular atoms") {
  const auto id = angular_atoms(MaxLinearModel(Matrix::Identity(2, 2), 2.0));
  REQUIRE(id.size() == 2);
  CHECK(id[0].mass == 1.0);
  CHECK(id[0].atom(0) == 1.0);
  CHECK(id[1].atom(1) == 1.0);

  const auto one = angular_atoms(MaxLinearModel(Vector::Ones(2), 2.0));
  CHECK(one[0].mass == doctest::Approx(2.0));
  CHECK(one[0].atom(0) == doctest::Approx(std::sqrt(0.5)));

  const MaxLinearModel m2(synthetic_a2(), 4.0);
  const auto atoms = angular_atoms(m2);
  CHECK(atoms.size() == 5);
  double total = 0.0;
  for (const auto& at : atoms) {
    total += at.mass;
    CHECK(lalpha_norm(at.atom, 4.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(std::abs(total - tpdm_of_model(m2).mass()) <= 1e-12 * total);
}

TEST_CASE("marginal scales") {
  CHECK(marginal_scales(MaxLinearModel(Matrix::Identity(3, 3), 2.0)) == Vector::Ones(3));
  Vector a(3);
  a << 0.3, 1.0, 2.5;
  CHECK((marginal_scales(MaxLinearModel(a, 1.0)) - a).norm() <= 1e-15);
  const MaxLinearModel m1(synthetic_a1(), 4.0);
  const Vector diag = tpdm_of_model(m1).sigma().diagonal();
  const Vector s = marginal_scales(m1);
  for (Index j = 0; j < 5; ++j) CHECK(s(j) == doctest::Approx(std::pow(diag(j), 0.25)).epsilon(1e-12));
}

TEST_CASE("simulation") {
  SUBCASE("one factor gives comonotone columns") {
    const Matrix y = simulate(MaxLinearModel(Vector::Ones(4), 2.0), 1000, 1);
    for (Index j = 1; j < 4; ++j) CHECK(y.col(j) == y.col(0));
  }
  SUBCASE("deterministic under any split") {
    const MaxLinearModel m(synthetic_a1(), 4.0);
    const Matrix a = simulate(m, 20000, 9, Exec{1});
    const Matrix b = simulate(m, 20000, 9, Exec{8});
    CHECK(a == b);
    CHECK(simulate_rows(m, 12345, 3, 9) == a.middleRows(12345, 3));
    CHECK(a.minCoeff() > 0.0);
    CHECK(simulate(m, 100, 10) != a.topRows(100));
  }
  SUBCASE("marginal distribution is Frechet") {
    const MaxLinearModel m(synthetic_a3(), 4.0);
    const Vector scale = marginal_scales(m);
    const Index n = 100000;
    const Matrix y = simulate(m, static_cast<std::size_t>(n), 3);
    for (Index j = 0; j < 5; ++j) {
      std::vector<double> col(y.col(j).data(), y.col(j).data() + n);
      std::sort(col.begin(), col.end());
      double ks = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double f = std::exp(-std::pow(col[static_cast<std::size_t>(i)] / scale(j), -4.0));
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                       std::abs(f - static_cast<double>(i + 1) / n)});
      }
      CHECK(ks < 0.01);
    }
  }
  SUBCASE("maxima grow like n^(1/alpha)") {
    const MaxLinearModel m(Matrix::Identity(2, 2), 2.0);
    std::vector<double> ratios;
    for (std::uint64_t s = 1; s <= 21; ++s) {
      const double small = simulate(m, 1000, s).col(0).maxCoeff();
      const double large = simulate(m, 100000, s + 1000).col(0).maxCoeff();
      ratios.push_back(large / small);
    }
    std::sort(ratios.begin(), ratios.end());
    // expected order of magnitude (10^5 / 10^3)^(1/2) = 10
    CHECK(ratios[10] > 3.0);
    CHECK(ratios[10] < 30.0);
  }
}
