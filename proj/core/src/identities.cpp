#include "smoothfix/identities.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "smoothfix/parallel.hpp"

namespace smoothfix {

TestFunction TestFunction::one() {
  return {"one", [](double) { return 1.0; }, 1.0, false};
}

TestFunction TestFunction::exp_neg() {
  return {"exp_neg", [](double s) { return std::exp(-s); }, 1.0, false};
}

TestFunction TestFunction::min_with(double c) {
  return {"min_" + std::to_string(c), [c](double s) { return std::min(s, c); },
          std::abs(c), false};
}

namespace {

// One tilted step from the current position. Returns false on an empty T.
bool tilted_step(const WeightModel& model, double alpha, Stream& rng,
                 std::vector<double>& weights, SpineResult& state) {
  model.sample_into(rng, weights);
  if (weights.empty()) {
    state.absorbed = true;
    state.weight = 0.0;
    return false;
  }
  thread_local std::vector<double> tilted;
  tilted.resize(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    tilted[i] = std::pow(weights[i], alpha);
    total += tilted[i];
  }
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t chosen = weights.size() - 1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += tilted[i];
    if (u < cumulative) {
      chosen = i;
      break;
    }
  }
  state.position -= std::log(weights[chosen]);
  state.weight *= total;
  ++state.steps;
  return true;
}

struct SideEstimates {
  Estimate value;
  double leaked = 0.0;
};

SideEstimates reduce(const std::vector<double>& xs, const std::vector<double>& leaks,
                     double widen) {
  RunningStats s;
  for (double x : xs) s.add(x);
  double leaked = 0.0;
  for (double l : leaks) leaked += l;
  Estimate e = s.estimate();
  e.std_error *= widen;
  return {e, leaks.empty() ? 0.0 : leaked / static_cast<double>(leaks.size())};
}

}  // namespace

SpineResult spine_walk(const WeightModel& model, double alpha, std::size_t n, Stream& rng) {
  SpineResult state;
  std::vector<double> weights;
  for (std::size_t k = 0; k < n; ++k)
    if (!tilted_step(model, alpha, rng, weights, state)) break;
  return state;
}

SpineResult ladder_spine_walk(const WeightModel& model, double alpha,
                              std::size_t max_steps, Stream& rng) {
  SpineResult state;
  std::vector<double> weights;
  while (state.steps < max_steps) {
    if (!tilted_step(model, alpha, rng, weights, state)) break;
    if (state.position > 0.0) break;
  }
  return state;
}

IdentityCheck check_many_to_one(const WeightModel& model, double alpha, std::size_t n,
                                const TestFunction& g, const Budgets& budgets) {
  const double widen = g.unbounded ? kUnboundedWidening : 1.0;
  const std::uint64_t tree_seed = derive_seed(budgets.seed, 0);
  const std::uint64_t spine_seed = derive_seed(budgets.seed, 1);

  std::vector<double> tree_values(budgets.tree_reps);
  parallel_for(budgets.tree_reps, [&](std::size_t r) {
    const RandomTree tree(model, derive_seed(tree_seed, r));
    double sum = 0.0;
    visit_generation(tree, n, [&](double s) { sum += std::exp(-alpha * s) * g(s); });
    tree_values[r] = sum;
  });

  std::vector<double> spine_values(budgets.spine_reps);
  parallel_for(budgets.spine_reps, [&](std::size_t r) {
    Stream rng(derive_seed(spine_seed, r));
    const SpineResult walk = spine_walk(model, alpha, n, rng);
    spine_values[r] = walk.absorbed ? 0.0 : walk.weight * g(walk.position);
  });

  IdentityCheck out;
  out.tree = reduce(tree_values, {}, widen).value;
  out.spine = reduce(spine_values, {}, widen).value;
  out.z = z_score(out.tree, out.spine);
  return out;
}

IdentityCheck check_ladder_identity(const WeightModel& model, double alpha,
                                    const TestFunction& g, const Budgets& budgets,
                                    const Caps& caps) {
  const double widen = g.unbounded ? kUnboundedWidening : 1.0;
  const std::uint64_t tree_seed = derive_seed(budgets.seed, 0);
  const std::uint64_t spine_seed = derive_seed(budgets.seed, 1);

  std::vector<double> tree_values(budgets.tree_reps);
  std::vector<double> tree_leaks(budgets.tree_reps);
  parallel_for(budgets.tree_reps, [&](std::size_t r) {
    const RandomTree tree(model, derive_seed(tree_seed, r));
    const Front line = ladder_front(tree, caps, alpha);
    double sum = 0.0;
    for (const auto& v : line.nodes) sum += v.mass(alpha) * g(v.log_weight);
    tree_values[r] = sum;
    tree_leaks[r] = line.leaked_mass;
  });

  std::vector<double> spine_values(budgets.spine_reps);
  std::vector<double> spine_unstopped(budgets.spine_reps);
  parallel_for(budgets.spine_reps, [&](std::size_t r) {
    Stream rng(derive_seed(spine_seed, r));
    const SpineResult walk = ladder_spine_walk(model, alpha, caps.max_generation, rng);
    const bool stopped = !walk.absorbed && walk.position > 0.0;
    spine_values[r] = stopped ? walk.weight * g(walk.position) : 0.0;
    spine_unstopped[r] = !walk.absorbed && !stopped ? walk.weight : 0.0;
  });

  IdentityCheck out;
  const SideEstimates tree_side = reduce(tree_values, tree_leaks, widen);
  const SideEstimates spine_side = reduce(spine_values, spine_unstopped, widen);
  out.tree = tree_side.value;
  out.spine = spine_side.value;
  out.leaked_mass = tree_side.leaked;
  out.spine_unstopped = spine_side.leaked;
  out.z = z_score(out.tree, out.spine);
  return out;
}

}  // namespace smoothfix
