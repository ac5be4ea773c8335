#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>

#include "smoothfix/branching_tree.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

// Test function g for the many-to-one identities. Values are clipped to
// [-bound, bound] unless `unbounded` is set, in which case reported standard
// errors are widened by kUnboundedWidening.
struct TestFunction {
  std::string name;
  std::function<double(double)> fn;
  double bound = 1.0;
  bool unbounded = false;

  double operator()(double s) const {
    const double v = fn(s);
    return unbounded ? v : std::clamp(v, -bound, bound);
  }

  static TestFunction one();
  static TestFunction exp_neg();         // e^{-s}, clipped at 1 for s < 0
  static TestFunction min_with(double c);  // min(s, c), clipped at |c|
};

inline constexpr double kUnboundedWidening = 2.0;

struct SpineResult {
  double position = 0.0;  // S_n
  double weight = 1.0;    // product of sum_j T_j^alpha over the steps
  bool absorbed = false;  // some step drew an empty T
  std::size_t steps = 0;
};

// Walk of the alpha-tilted spine: each step samples T, moves to child i with
// probability T_i^alpha / sum_j T_j^alpha, and multiplies the importance
// weight by sum_j T_j^alpha. E[weight g(S_n); not absorbed] equals
// E sum_{|v|=n} e^{-alpha S(v)} g(S(v)).
SpineResult spine_walk(const WeightModel& model, double alpha, std::size_t n, Stream& rng);

// As spine_walk, but stops at the first step with S > 0 or after max_steps.
SpineResult ladder_spine_walk(const WeightModel& model, double alpha,
                              std::size_t max_steps, Stream& rng);

struct Budgets {
  std::size_t tree_reps = 10000;
  std::size_t spine_reps = 10000;
  std::uint64_t seed = 1;
};

struct IdentityCheck {
  Estimate tree;
  Estimate spine;
  double z = 0.0;
  double leaked_mass = 0.0;  // ladder identity only: mean tree-side leak
  double spine_unstopped = 0.0;  // ladder identity only: mean weight not stopped
};

IdentityCheck check_many_to_one(const WeightModel& model, double alpha, std::size_t n,
                                const TestFunction& g, const Budgets& budgets);

IdentityCheck check_ladder_identity(const WeightModel& model, double alpha,
                                    const TestFunction& g, const Budgets& budgets,
                                    const Caps& caps = {});

}  // namespace smoothfix
