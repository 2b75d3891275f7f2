#include "exdep/fixtures.hpp"

namespace exdep {

Matrix synthetic_a1() {
  Matrix a(5, 8);
  a << 1.00, 0.50, 1.75, 0.00, 0.50, 0.75, 1.00, 0.25,
       2.00, 0.00, 1.00, 1.50, 0.25, 1.00, 1.00, 1.00,
       1.75, 1.25, 0.50, 0.75, 2.00, 1.75, 0.25, 0.25,
       1.25, 0.25, 1.25, 2.00, 2.00, 0.50, 0.25, 0.25,
       1.75, 0.50, 0.25, 0.75, 0.50, 1.75, 0.00, 1.25;
  return a;
}

Matrix synthetic_a2() {
  Matrix a(5, 5);
  a << 1.00, 0.00, 0.50, 0.00, 0.50,
       2.00, 1.50, 0.00, 1.00, 0.00,
       1.75, 0.75, 1.25, 0.25, 0.75,
       1.25, 2.00, 0.25, 0.25, 0.25,
       1.75, 0.75, 0.50, 1.25, 0.50;
  return a;
}

Matrix synthetic_a3() {
  Matrix a(5, 3);
  a << 1.00, 0.00, 0.00,
       2.00, 1.50, 0.00,
       1.75, 0.75, 0.25,
       1.25, 2.00, 1.00,
       1.75, 0.75, 0.50;
  return a;
}

std::vector<NamedMatrix> synthetic_fixtures() {
  return {{"A1", synthetic_a1()}, {"A2", synthetic_a2()}, {"A3", synthetic_a3()}};
}

}  // namespace exdep
