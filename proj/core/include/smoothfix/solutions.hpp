#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothfix/martingales.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

// Multiplicatively periodic parameter h. Constant(c), or r-periodic with
// values on the log-uniform grid r^{j/K}, j = 0..K-1, over [1, r) and
// piecewise-linear interpolation of log h in log t.
class PeriodicH {
 public:
  static PeriodicH constant(double c);

  // Throws Error(kInvalidArgument) unless span > 1 and every value is > 0,
  // and Error(kContractViolation) when h(t) t^alpha decreases somewhere on a
  // grid 16x finer than the value grid.
  static PeriodicH lattice(double span, std::vector<double> values, double alpha);

  double operator()(double t) const;

  bool is_constant() const noexcept { return values_.size() == 1 && span_ == 1.0; }
  double span() const noexcept { return span_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double alpha() const noexcept { return alpha_; }

  PeriodicH scaled(double c) const;

 private:
  PeriodicH(double span, std::vector<double> values, double alpha);

  double span_ = 1.0;
  std::vector<double> values_;
  std::vector<double> log_values_;
  double alpha_ = 1.0;
};

// f(t) = E exp(-W h(t) t^alpha) with W drawn from an empirical sample.
class SolutionSpec {
 public:
  // Throws Error(kEmptySample) if w has no samples.
  SolutionSpec(double alpha, PeriodicH h, std::shared_ptr<const EmpiricalW> w);

  double alpha() const noexcept { return alpha_; }
  const PeriodicH& h() const noexcept { return h_; }
  const EmpiricalW& w() const noexcept { return *w_; }
  std::shared_ptr<const EmpiricalW> w_ptr() const noexcept { return w_; }

  // h(t) t^alpha
  double scale_at(double t) const { return h_(t) * std::pow(t, alpha_); }

  double operator()(double t) const { return eval(t).value; }
  Estimate eval(double t) const;

  // 1 - f(t) averaged as -expm1, accurate for small t.
  Estimate one_minus(double t) const;

  SolutionSpec with_h(PeriodicH h) const { return {alpha_, std::move(h), w_}; }
  SolutionSpec with_scaled_w(double c) const;

 private:
  double alpha_;
  PeriodicH h_;
  std::shared_ptr<const EmpiricalW> w_;
};

inline Estimate eval_f(const SolutionSpec& sol, double t) { return sol.eval(t); }

// SolutionSpec document: {"alpha", "h": {"type": "constant", "c"} |
// {"type": "lattice", "span", "values"}, "w": {"path", "checksum"}}.
nlohmann::json solution_to_json(const SolutionSpec& sol, const std::string& w_path,
                                const std::string& w_checksum);
PeriodicH h_from_json(const nlohmann::json& doc, double alpha);
nlohmann::json h_to_json(const PeriodicH& h);

std::vector<double> log_grid(double lo, double hi, std::size_t n);

// Values on a strictly increasing positive grid. Between grid points log(-log f)
// is interpolated linearly in log t (plain -log f where f hits 1). Below the
// grid f = exp(-D t^alpha) matched at the first point; above it f is held at
// the last value.
struct GridFunction {
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> std_error;
  double alpha = 1.0;

  double operator()(double x) const;
};

GridFunction tabulate(const std::function<double(double)>& f, std::span<const double> grid,
                      double alpha);

// (T f)(t) = E prod_i f(t T_i) by Monte Carlo over `reps` draws of T, shared
// by all grid points.
GridFunction smoothing_map(const std::function<double(double)>& f, const WeightModel& model,
                           std::span<const double> tgrid, std::size_t reps,
                           std::uint64_t seed, double alpha = 1.0);

struct ResidualPoint {
  double t = 0.0;
  Estimate f;
  Estimate mapped;
  double z = 0.0;
};

struct ResidualReport {
  double sup_abs = 0.0;
  double worst_abs_z = 0.0;
  std::vector<ResidualPoint> points;
};

struct ResidualOptions {
  std::size_t reps = 100000;
  std::uint64_t seed = 1;
  // Dense tabulation of f used inside the map when W has more than one
  // sample. Direct evaluation otherwise.
  std::size_t points_per_decade = 100;
  double tabulation_floor = 1e-4;  // tabulate down to tgrid.front() * floor
};

ResidualReport residual(const SolutionSpec& sol, const WeightModel& model,
                        std::span<const double> tgrid, const ResidualOptions& options = {});

struct MinSamples {
  std::vector<double> x;  // +inf where W = 0
  std::size_t flagged = 0;  // inversions that landed on a flat stretch of h(t) t^alpha
};

// X with P(X > t) = f(t): X solves h(X) X^alpha = E / W, E standard
// exponential, W uniform from the empirical sample.
MinSamples sample_min_solution(const SolutionSpec& sol, std::size_t n, std::uint64_t seed);

// One step of X = inf { X_i / T_i }: n output samples, inputs resampled with
// replacement; +inf for an empty T.
std::vector<double> min_step(std::span<const double> xs, const WeightModel& model,
                             std::uint64_t seed);

// One step of X = sum_i T_i^power X_i with inputs resampled with replacement.
std::vector<double> sum_step(std::span<const double> xs, const WeightModel& model,
                             std::uint64_t seed, double power = 1.0);

// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|. +inf values form a
// common top atom.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// c(level) sqrt((n + m) / (n m)) with c(level) = sqrt(-log(level / 2) / 2).
double ks_critical_value(double level, std::size_t n, std::size_t m);

}  // namespace smoothfix
