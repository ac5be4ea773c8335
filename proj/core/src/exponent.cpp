#include "smoothfix/exponent.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "smoothfix/error.hpp"

namespace smoothfix {

const char* to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::kA4a: return "A4a";
    case Regime::kA4b: return "A4b";
    case Regime::kBoth: return "both";
    case Regime::kUndetermined: return "undetermined";
  }
  return "undetermined";
}

namespace {

constexpr double kSignificance = 3.0;

struct MFunctions {
  std::function<MEstimate(double)> m;
  std::function<MEstimate(double)> m_prime;
};

MFunctions m_functions(const WeightModel& model, const McBudget& budget,
                       std::shared_ptr<SampledM>& storage) {
  if (model.has_exact_m()) {
    return {[&model](double t) { return m_eval(model, t); },
            [&model](double t) { return m_prime_eval(model, t); }};
  }
  storage = std::make_shared<SampledM>(model, budget);
  auto sampled = storage;
  return {[sampled](double t) { return sampled->m(t); },
          [sampled](double t) { return sampled->m_prime(t); }};
}

}  // namespace

CharacteristicExponent find_alpha(const WeightModel& model,
                                  const FindAlphaOptions& options) {
  if (!(options.search_max > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "find_alpha: search_max must be > 0");
  if (options.grid_points < 2)
    throw Error(ErrorCode::kInvalidArgument, "find_alpha: need at least 2 grid points");
  const double en = model.mean_count();
  if (!(en > 1.0))
    throw Error(ErrorCode::kInvalidArgument,
                "find_alpha: m(0) = E N = " + std::to_string(en) + " is not > 1");

  std::shared_ptr<SampledM> storage;
  const MFunctions fns = m_functions(model, options.budget, storage);
  auto excess = [&](double theta) {
    const MEstimate e = fns.m(theta);
    return std::pair{e.diverged ? std::numeric_limits<double>::infinity()
                                : e.value - 1.0,
                     e.std_error};
  };

  const std::size_t k_points = options.grid_points;
  std::vector<double> grid(k_points);
  for (std::size_t k = 0; k < k_points; ++k) {
    const double octave = options.grid_octaves *
                          static_cast<double>(k_points - 1 - k) /
                          static_cast<double>(k_points - 1);
    grid[k] = options.search_max * std::exp2(-octave);
  }
  grid.back() = options.search_max;

  std::vector<std::pair<double, double>> values(k_points);
  for (std::size_t k = 0; k < k_points; ++k) values[k] = excess(grid[k]);

  std::size_t crossing = k_points;
  for (std::size_t k = 0; k < k_points; ++k) {
    if (values[k].first <= 0.0) {
      crossing = k;
      break;
    }
  }
  if (crossing == k_points) {
    double min_excess = std::numeric_limits<double>::infinity();
    for (const auto& v : values) min_excess = std::min(min_excess, v.first);
    throw Error(ErrorCode::kAlphaNotBracketed,
                "alpha not bracketed: m(theta) - 1 >= " + std::to_string(min_excess) +
                    " on the grid over (0, " + std::to_string(options.search_max) +
                    "]; raise search_max if the crossing lies beyond it");
  }
  if (!model.has_exact_m()) {
    bool resolved = false;
    for (std::size_t j = crossing; j < k_points && !resolved; ++j)
      resolved = values[j].first < -kSignificance * values[j].second;
    if (!resolved)
      throw Error(ErrorCode::kInconclusive,
                  "inconclusive at budget: m(theta) - 1 never significantly below 0 "
                  "after the first sign change; increase reps");
  }

  double lo = crossing == 0 ? 0.0 : grid[crossing - 1];
  double hi = grid[crossing];
  double alpha = hi;
  if (values[crossing].first != 0.0) {
    while (hi - lo > options.tol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (excess(mid).first > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    alpha = 0.5 * (lo + hi);
    // Closed forms: polish to machine precision with Newton steps kept inside
    // the bracket. W_n at depth n magnifies the root error by about n.
    if (model.has_exact_m()) {
      double best = std::abs(excess(alpha).first);
      for (int i = 0; i < 8 && best > 0.0; ++i) {
        const double slope = fns.m_prime(alpha).value;
        if (!(slope < 0.0) || !std::isfinite(slope)) break;
        const double next = alpha - excess(alpha).first / slope;
        if (!(next >= lo && next <= hi)) break;
        const double e = std::abs(excess(next).first);
        if (!(e < best)) break;
        alpha = next;
        best = e;
      }
    }
  }

  CharacteristicExponent ce;
  ce.alpha = alpha;
  ce.solver_tolerance = options.tol;
  ce.m_at_alpha = fns.m(alpha);
  ce.m_prime_at_alpha = fns.m_prime(alpha);
  double shape_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 32; ++i) {
    const double beta = alpha * static_cast<double>(i) / 32.0;
    shape_min = std::min(shape_min, fns.m(beta).value);
  }
  ce.a3_shape_min = shape_min;
  return ce;
}

Regime classify_regime(const WeightModel& model, const CharacteristicExponent& ce,
                       double theta_probe, const McBudget& budget) {
  if (!(theta_probe >= 0.0 && theta_probe < ce.alpha))
    throw Error(ErrorCode::kInvalidArgument,
                "classify_regime: theta_probe must lie in [0, alpha)");
  const MEstimate mp = ce.m_prime_at_alpha;
  bool a4a = !mp.diverged && mp.value + kSignificance * mp.std_error < 0.0;
  if (a4a) {
    const SampledM sampled(model, budget);
    double kurtosis = 0.0;
    const MEstimate probe = sampled.xlogx(ce.alpha, &kurtosis);
    a4a = !probe.diverged && kurtosis <= 100.0;
  }
  const MEstimate m_probe = m_eval(model, theta_probe, budget);
  const bool a4b = !m_probe.diverged && std::isfinite(m_probe.value);
  if (a4a && a4b) return Regime::kBoth;
  if (a4a) return Regime::kA4a;
  if (a4b) return Regime::kA4b;
  return Regime::kUndetermined;
}

}  // namespace smoothfix
