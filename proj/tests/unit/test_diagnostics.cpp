#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fleet.hpp"
#include "oracles.hpp"
#include "smoothfix/diagnostics.hpp"
#include "smoothfix/error.hpp"
#include "smoothfix/martingales.hpp"

using namespace smoothfix;

namespace {

const std::vector<double> kMilli = {1e-3};

std::shared_ptr<const EmpiricalW> atom(double c) {
  return std::make_shared<EmpiricalW>(EmpiricalW::atom(c));
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("regvar of exp(-t)") {
  const OneMinusF g = one_minus_of([](double t) { return std::exp(-t); });
  const RatioCurve c = regvar_curve(g, 1.0, 0.5, kMilli);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].value == doctest::Approx(oracle::kRatioHalfAtMilli).epsilon(1e-9));
  CHECK(c.points[0].target == 0.5);
}

TEST_CASE("regvar with u = 1 is exactly 1") {
  const auto w = std::make_shared<EmpiricalW>(sample_limit_W(fleet::uniform_pair(), 1.0, 6, 300, 2));
  const OneMinusF g = one_minus_of(SolutionSpec(1.0, PeriodicH::constant(1.0), w));
  const RatioCurve c = regvar_curve(g, 1.0, 1.0, log_grid(1e-4, 1.0, 20));
  CHECK(c.points.size() == 20);
  for (const auto& p : c.points) CHECK(p.value == 1.0);
}

TEST_CASE("tail floor drops points") {
  const OneMinusF g = one_minus_of([](double t) { return std::exp(-t); });
  const RatioCurve c = regvar_curve(g, 1.0, 0.5, std::vector<double>{1e-18, 1e-3});
  CHECK(c.points.size() == 1);
  CHECK(c.dropped.size() == 1);
}

TEST_CASE("lattice discipline") {
  const OneMinusF g = one_minus_of([](double t) { return std::exp(-t); });
  CHECK_THROWS_AS(regvar_curve(g, 1.0, 0.8, kMilli, 2.0), Error);
  CHECK_NOTHROW(regvar_curve(g, 1.0, 0.25, kMilli, 2.0));
  CHECK_THROWS_AS(regvar_curve(g, 1.0, 0.5, std::vector<double>{1e-3, 1.5e-3}, 2.0), Error);
  CHECK_NOTHROW(regvar_curve(g, 1.0, 0.5, std::vector<double>{1e-3, 4e-3, 2e-3}, 2.0));
  CHECK_THROWS_AS(regvar_curve(g, 1.0, -1.0, kMilli), Error);
}

TEST_CASE("regvar on the uniform-pair solution") {
  const auto w = std::make_shared<EmpiricalW>(sample_limit_W(fleet::uniform_pair(), 1.0, 14, 2000, 6));
  const OneMinusF g = one_minus_of(SolutionSpec(1.0, PeriodicH::constant(1.0), w));
  const RatioCurve c = regvar_curve(g, 1.0, 0.8, kMilli);
  CHECK(std::abs(c.points[0].value - 0.8) <= 0.05);
}

TEST_CASE("D_alpha of exp(-t) and exp(-c t^a)") {
  const DAlphaCurve d = d_alpha_curve(one_minus_of([](double t) { return std::exp(-t); }), 1.0, kMilli);
  CHECK(d.points[0].value == doctest::Approx(oracle::kD1AtMilli).epsilon(1e-9));

  // (1 - exp(-c t^a)) / t^a = c (1 - c t^a / 2 + ...): constant c up to the
  // first-order term, which shrinks with t.
  for (double alpha : {0.5, 1.0, 1.7}) {
    const double c = 2.5;
    const OneMinusF g = [&](double t) { return Estimate::exact_value(-std::expm1(-c * std::pow(t, alpha))); };
    const DAlphaCurve curve = d_alpha_curve(g, alpha, log_grid(1e-12, 1e-6, 10));
    for (const auto& p : curve.points) {
      const double x = std::pow(p.t, alpha);
      CHECK(p.value == doctest::Approx(-std::expm1(-c * x) / x).epsilon(1e-14));
      CHECK(std::abs(p.value - c) <= c * c * x);
    }
  }
}

TEST_CASE("D_alpha divided by a lattice h is slowly varying") {
  const SolutionSpec sol(1.0, fleet::ternary_h(), atom(1.0));
  const DAlphaCurve d = d_alpha_curve(one_minus_of(sol), 1.0, kMilli, fleet::ternary_h());
  CHECK(d.slow_variation_score <= 0.05);
  const DAlphaCurve raw = d_alpha_curve(one_minus_of(sol), 1.0, kMilli);
  CHECK(raw.slow_variation_score > d.slow_variation_score);
}

TEST_CASE("nerman ratio on binary-half") {
  const WeightModel bh = fleet::binary_half();
  const Front f = first_exit_front(RandomTree(bh, 1), 3.3);
  CHECK(*nerman_ratio(f, 1.0, 1.0, std::log(2.0)) == 0.0);
  CHECK(*nerman_ratio(f, 1.0, 1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(*nerman_ratio(f, 1.0, 1.0, 100.0) == 0.0);
  CHECK_FALSE(nerman_ratio(Front{}, 1.0, 1.0, 0.0).has_value());
}

TEST_CASE("nerman ratio is non-increasing in c") {
  const WeightModel up = fleet::uniform_pair();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Front f = first_exit_front(RandomTree(up, s), 4.0);
    double previous = *nerman_ratio(f, 1.0, 1.0, 0.0);
    CHECK(previous <= 1.0);
    for (double c = 0.1; c < 5; c += 0.1) {
      const double r = *nerman_ratio(f, 1.0, 1.0, c);
      CHECK(r <= previous);
      previous = r;
    }
  }
}

TEST_CASE("appr_W on binary-half follows the closed form") {
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), atom(1.0));
  ApprWOptions opt;
  opt.reps = 3;
  opt.proxy_depth = 6;
  const std::vector<double> ts = {0.0, 1.0, 3.0, 6.0};
  const auto trace = appr_W_trace(fleet::binary_half(), sol, ts, opt);
  for (const auto& p : trace) {
    const double expected = std::exp(p.t) * (1 - std::exp(-std::exp(-p.t))) - 1.0;
    CHECK(p.mean_gap == doctest::Approx(expected).epsilon(1e-10));
    CHECK(p.abs_gap_std_error == 0.0);
  }
  CHECK(std::abs(trace[3].mean_gap) < std::abs(trace[1].mean_gap));
}

TEST_CASE("appr_W t = 0 entry is the one-generation statistic") {
  const WeightModel up = fleet::uniform_pair();
  const auto w = std::make_shared<EmpiricalW>(sample_limit_W(up, 1.0, 10, 500, 2));
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), w);
  ApprWOptions opt;
  opt.reps = 20;
  opt.proxy_depth = 8;
  opt.seed = 9;
  const std::vector<double> ts = {0.0};
  const auto trace = appr_W_trace(up, sol, ts, opt);
  RunningStats s;
  for (std::size_t r = 0; r < 20; ++r) {
    const RandomTree tree(up, derive_seed(9, r));
    s.add((1 - sol(1.0)) * additive_value(generation_front(tree, 1), 1.0));
  }
  CHECK(trace[0].mean_statistic == doctest::Approx(s.mean()).epsilon(1e-12));
}

TEST_CASE("appr_W requires constant h") {
  const SolutionSpec sol(1.0, fleet::ternary_h(), atom(1.0));
  const std::vector<double> ts = {1.0};
  CHECK_THROWS_AS(appr_W_trace(fleet::ternary_third(), sol, ts), Error);
}

TEST_CASE("curve CSV") {
  std::ostringstream out;
  const std::vector<CurvePoint> pts = {{0.5, 1.0, 2.0, 0.25}};
  write_curve_csv(out, pts);
  CHECK(out.str() == "t,value,target,stderr\n0.5,1,2,0.25\n");
}

}
