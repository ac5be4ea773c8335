#pragma once

#include <string>

#include "smoothfix/weight_models.hpp"

namespace smoothfix {

enum class Regime { kA4a, kA4b, kBoth, kUndetermined };

const char* to_string(Regime regime) noexcept;

// The root alpha of m(alpha) = 1 with m > 1 on [0, alpha).
struct CharacteristicExponent {
  double alpha = 0.0;
  MEstimate m_at_alpha;
  MEstimate m_prime_at_alpha;
  Regime regime = Regime::kUndetermined;
  double solver_tolerance = 0.0;
  // min of m over a 32-point grid in [0, alpha); > 1 when (A3) holds
  double a3_shape_min = 0.0;
};

struct FindAlphaOptions {
  double search_max = 16.0;
  double tol = 1e-12;
  std::size_t grid_points = 64;
  // Octaves spanned by the log-spaced scan grid below search_max.
  double grid_octaves = 20.0;
  McBudget budget;  // used only when the model has no exact m
};

// Smallest crossing of m = 1 on (0, search_max]: log-spaced grid scan, then
// bisection down to options.tol. A closed-form m is then polished by Newton
// steps inside the bracket. Models without one are bisected on a frozen
// sample (common random numbers).
//
// Throws Error(kAlphaNotBracketed) if m stays above 1 on the grid and
// Error(kInconclusive) if Monte Carlo noise leaves the crossing unresolved.
// Throws Error(kInvalidArgument) when E N <= 1.
CharacteristicExponent find_alpha(const WeightModel& model,
                                  const FindAlphaOptions& options = {});

// A4a if m'(alpha) is negative by three standard errors and the x log x probe
// is finite and not heavy-tailed; A4b if m(theta_probe) is finite.
Regime classify_regime(const WeightModel& model, const CharacteristicExponent& ce,
                       double theta_probe, const McBudget& budget = {});

}  // namespace smoothfix
