#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace smoothfix {

// A point estimate with its standard error. Closed-form values carry
// stderr 0 and exact = true.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;

  static Estimate exact_value(double v) { return {v, 0.0, true}; }
};

// Neumaier compensated sum; long runs of similar terms stay exact to a few ulp.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Welford accumulator. Add in a fixed order to keep results bit-reproducible.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
    sum_ += x;
  }

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double sum() const noexcept { return sum_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stderr_of_mean() const noexcept {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

  Estimate estimate() const noexcept { return {mean_, stderr_of_mean(), false}; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double sum_ = 0.0;
};

inline Estimate mean_estimate(std::span<const double> xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s.estimate();
}

// Sample excess kurtosis; 0 for fewer than four points or zero variance.
double excess_kurtosis(std::span<const double> xs);

// (a - b) / sqrt(sa^2 + sb^2). Two zero-variance estimates give 0 when they
// agree to `exact_tol` (relative) and +-inf otherwise.
double z_score(const Estimate& a, const Estimate& b, double exact_tol = 1e-12);

}  // namespace smoothfix
