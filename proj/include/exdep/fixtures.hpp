#pragma once

// Bundled coefficient matrices of the synthetic study (5 x 8, 5 x 5, 5 x 3).

#include "exdep/common.hpp"

#include <string>
#include <vector>

namespace exdep {

Matrix synthetic_a1();
Matrix synthetic_a2();
Matrix synthetic_a3();

struct NamedMatrix {
  std::string name;
  Matrix a;
};

std::vector<NamedMatrix> synthetic_fixtures();

}  // namespace exdep
