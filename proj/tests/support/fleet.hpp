#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "smoothfix/solutions.hpp"
#include "smoothfix/weight_models.hpp"

namespace fleet {

using namespace smoothfix;

inline WeightModel binary_half() {
  return WeightModel(Deterministic{{0.5, 0.5}}, 2.0, "finite_atoms", "binary-half");
}

inline WeightModel ternary_third() {
  return WeightModel(Deterministic{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, 3.0, "finite_atoms",
                     "ternary-third");
}

inline WeightModel uniform_pair() {
  return WeightModel(IidCount{FixedCount{2}, UniformWeight{0.0, 1.0}}, 1.0, "iid_product",
                     "uniform-pair");
}

// The fourth fleet member: T = (0.2, 1.2) always. 0.2^a + 1.2^a > 1 for all a.
inline WeightModel atom_02_12() {
  return WeightModel(FiniteMixture{{{1.0, {0.2, 1.2}}}}, 1.0, "finite_atoms", "atom-0.2-1.2");
}

// Extra coverage with a genuine alpha in (0, 1): the [0.2, 1.2] atom mixed
// half-and-half with a single child of weight 0.25.
inline WeightModel supplemental() {
  return WeightModel(FiniteMixture{{{0.5, {0.2, 1.2}}, {0.5, {0.25}}}}, 1.0, "finite_atoms",
                     "mixture-0.2-1.2-0.25");
}

// A valid nonconstant 3-periodic h for alpha = 1.
inline PeriodicH ternary_h() {
  std::vector<double> v(32);
  for (std::size_t j = 0; j < v.size(); ++j)
    v[j] = 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * static_cast<double>(j) / 32.0);
  return PeriodicH::lattice(3.0, v, 1.0);
}

}  // namespace fleet
