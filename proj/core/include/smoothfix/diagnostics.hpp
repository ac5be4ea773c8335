#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "smoothfix/branching_tree.hpp"
#include "smoothfix/solutions.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

// 1 - f(t) with a standard error. Diagnostics only ever look at the tail
// 1 - f near 0, so evaluators hand it over directly.
using OneMinusF = std::function<Estimate(double)>;

OneMinusF one_minus_of(const SolutionSpec& sol);
// For closed forms: 1 - f(t), marked exact.
OneMinusF one_minus_of(std::function<double(double)> f);

struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
  double target = 0.0;
  double std_error = 0.0;
};

struct RatioCurve {
  double u = 1.0;
  double alpha = 1.0;
  std::vector<CurvePoint> points;  // value (1-f(ut))/(1-f(t)), target u^alpha
  std::vector<double> dropped;     // t where 1-f fell below kTailFloor
};

inline constexpr double kTailFloor = 1e-15;

// Throws Error(kInvalidArgument) for u <= 0, Error(kLatticeDiscipline) when
// lattice_span > 1 and u is not in r^Z or the grid leaves one residue class.
// The standard error ignores the positive correlation between numerator and
// denominator and so errs large.
RatioCurve regvar_curve(const OneMinusF& g, double alpha, double u,
                        std::span<const double> tgrid, double lattice_span = 1.0);

struct DAlphaCurve {
  std::vector<CurvePoint> points;  // value (1-f(t))/t^alpha, divided by h if given
  std::vector<double> dropped;
  // max over u in {0.5, 2} of |D(ut)/D(t) - 1| at the smallest kept t
  double slow_variation_score = 0.0;
};

DAlphaCurve d_alpha_curve(const OneMinusF& g, double alpha, std::span<const double> tgrid,
                          const std::optional<PeriodicH>& h = std::nullopt);

// sum e^{-beta(S-t)} 1{S-t > c} / sum e^{-alpha(S-t)} over a first-exit
// front at level t. Empty front: nullopt.
std::optional<double> nerman_ratio(const Front& front, double alpha, double beta, double c);

struct ApprWPoint {
  double t = 0.0;
  double mean_statistic = 0.0;
  double mean_gap = 0.0;  // statistic - c W_proxy
  double mean_abs_gap = 0.0;
  double abs_gap_std_error = 0.0;
  double leaked_mass = 0.0;  // mean over replications
  std::size_t capped_reps = 0;
};

struct ApprWOptions {
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  std::size_t proxy_depth = 16;
  Caps caps{};
};

// Along first-exit lines T_t of alpha S: the statistic
// e^t (1 - f(e^{-t/alpha})) sum_{T_t} L^alpha against c W_proxy, where f is
// built with h = c constant and W_proxy is W_{proxy_depth} of the same tree.
// Throws Error(kInvalidArgument) for a non-constant h or a decreasing tlist.
std::vector<ApprWPoint> appr_W_trace(const WeightModel& model, const SolutionSpec& sol,
                                     std::span<const double> tlist,
                                     const ApprWOptions& options = {});

// CSV: t,value,target,stderr
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points);

}  // namespace smoothfix
