#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fleet.hpp"
#include "oracles.hpp"
#include "smoothfix/error.hpp"
#include "smoothfix/solutions.hpp"

using namespace smoothfix;

namespace {

std::shared_ptr<const EmpiricalW> atom(double c) {
  return std::make_shared<EmpiricalW>(EmpiricalW::atom(c));
}

}  // namespace

TEST_SUITE("solutions") {

TEST_CASE("periodic h") {
  const PeriodicH h = fleet::ternary_h();
  for (double t : {1e-3, 0.2, 1.0, 2.5, 40.0}) {
    CHECK(h(3 * t) == doctest::Approx(h(t)).epsilon(1e-12));
    CHECK(h(t / 3) == doctest::Approx(h(t)).epsilon(1e-12));
  }
  CHECK(h(1.0) == doctest::Approx(1.0));
  CHECK(h(std::pow(3.0, 8.0 / 32)) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(PeriodicH::constant(2.0)(123.0) == 2.0);
}

TEST_CASE("h with h(t) t^alpha decreasing is rejected") {
  std::vector<double> v(16, 1.0);
  v[5] = 3.0;  // sharp drop right after
  CHECK_THROWS_AS(PeriodicH::lattice(2.0, v, 1.0), Error);
  CHECK_THROWS_AS(PeriodicH::lattice(1.0, {1.0}, 1.0), Error);
  CHECK_THROWS_AS(PeriodicH::lattice(2.0, {1.0, -1.0}, 1.0), Error);
  CHECK_THROWS_AS(PeriodicH::constant(0.0), Error);
}

TEST_CASE("eval_f closed forms") {
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), atom(1.0));
  CHECK(eval_f(sol, 0.7).value == doctest::Approx(oracle::kExpNeg07).epsilon(1e-15));
  CHECK(eval_f(sol, 0.7).exact);
  CHECK(eval_f(sol, 0.0).value == 1.0);

  const EmpiricalW w = sample_limit_W(fleet::binary_half(), 1.0, 6, 10, 1);
  const SolutionSpec two(1.0, PeriodicH::constant(2.0), std::make_shared<EmpiricalW>(w));
  for (double t : {0.1, 1.0, 3.0}) CHECK(two(t) == doctest::Approx(std::exp(-2 * t)).epsilon(1e-12));
}

TEST_CASE("empty W sample is rejected") {
  CHECK_THROWS_AS(SolutionSpec(1.0, PeriodicH::constant(1.0), std::make_shared<EmpiricalW>()), Error);
}

TEST_CASE("eval_f is non-increasing and tends to 1 at 0") {
  const auto w = std::make_shared<EmpiricalW>(sample_limit_W(fleet::uniform_pair(), 1.0, 8, 500, 3));
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), w);
  const SolutionSpec lat(1.0, fleet::ternary_h(), atom(1.0));
  for (const auto* s : {&sol, &lat}) {
    double previous = 1.0;
    for (double t : log_grid(1e-6, 100.0, 400)) {
      const double v = (*s)(t);
      CHECK(v <= previous);
      previous = v;
    }
    CHECK((*s)(1e-9) > 1.0 - 1e-8);
  }
}

TEST_CASE("scale closure: (c h, W) and (h, c W) agree") {
  const auto w = std::make_shared<EmpiricalW>(sample_limit_W(fleet::uniform_pair(), 1.0, 8, 500, 3));
  for (const PeriodicH& h : {PeriodicH::constant(1.0), fleet::ternary_h()}) {
    const SolutionSpec base(1.0, h, w);
    for (double c : {0.5, 3.0}) {
      const SolutionSpec a = base.with_h(h.scaled(c));
      const SolutionSpec b = base.with_scaled_w(c);
      for (double t : log_grid(1e-3, 10.0, 30)) CHECK(std::abs(a(t) - b(t)) <= 1e-12);
    }
  }
}

TEST_CASE("smoothing map: fixed points and closed forms") {
  const std::vector<double> grid = log_grid(1e-3, 10.0, 30);
  const auto f = [](double t) { return std::exp(-t); };
  const GridFunction a = smoothing_map(f, fleet::binary_half(), grid, 10, 1);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(a.value[i] - f(grid[i])) <= 1e-12);

  const GridFunction one = smoothing_map([](double) { return 1.0; }, fleet::uniform_pair(), grid, 100, 1);
  for (double v : one.value) CHECK(v == 1.0);

  const std::vector<double> t1 = {1.0};
  const GridFunction u = smoothing_map(f, fleet::uniform_pair(), t1, 100000, 4);
  CHECK(std::abs(u.value[0] - oracle::kUniformPairMapAt1) <= 4 * u.std_error[0]);
}

TEST_CASE("residual: binary-half with exp(-t)") {
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), atom(1.0));
  const ResidualReport r = residual(sol, fleet::binary_half(), log_grid(1e-3, 10.0, 30), {100, 1});
  CHECK(r.sup_abs <= 1e-12);
  CHECK(r.worst_abs_z == 0.0);
}

TEST_CASE("residual: ternary-third with a nonconstant lattice h") {
  const SolutionSpec sol(1.0, fleet::ternary_h(), atom(1.0));
  const ResidualReport r = residual(sol, fleet::ternary_third(), log_grid(1e-3, 10.0, 30), {100, 1});
  CHECK(r.sup_abs <= 1e-6);
}

TEST_CASE("grid function interpolation") {
  const std::vector<double> grid = log_grid(1e-2, 10.0, 200);
  const GridFunction g = tabulate([](double t) { return std::exp(-2 * t); }, grid, 1.0);
  // exact on the Weibull family: log(-log f) is linear in log t
  for (double t : {1e-5, 3e-2, 0.77, 5.0}) CHECK(g(t) == doctest::Approx(std::exp(-2 * t)).epsilon(1e-12));
  CHECK(g(100.0) == g.value.back());
  CHECK(g(0.0) == 1.0);
}

TEST_CASE("min-type samples: exponential and Weibull") {
  const SolutionSpec e(1.0, PeriodicH::constant(1.0), atom(1.0));
  const MinSamples x = sample_min_solution(e, 100000, 3);
  const Estimate m = mean_estimate(x.x);
  CHECK(std::abs(m.value - 1.0) <= 4 * m.std_error);
  CHECK(x.flagged == 0);

  const SolutionSpec wb(2.0, PeriodicH::constant(1.0), atom(1.0));
  const MinSamples y = sample_min_solution(wb, 100000, 4);
  const double p = static_cast<double>(std::count_if(y.x.begin(), y.x.end(), [](double v) { return v > 1.0; })) / 1e5;
  CHECK(std::abs(p - std::exp(-1.0)) <= 4 * std::sqrt(p * (1 - p) / 1e5));
}

TEST_CASE("W = 0 atom gives +inf with its probability") {
  auto w = std::make_shared<EmpiricalW>();
  w->samples = {0.0, 1.0, 1.0, 1.0};
  const SolutionSpec sol(1.0, PeriodicH::constant(1.0), w);
  const MinSamples x = sample_min_solution(sol, 40000, 5);
  const double q = static_cast<double>(std::count_if(x.x.begin(), x.x.end(), [](double v) { return std::isinf(v); })) / 4e4;
  CHECK(std::abs(q - 0.25) <= 4 * std::sqrt(0.25 * 0.75 / 4e4));
}

TEST_CASE("min-type samples with a lattice h invert h(t) t^alpha") {
  const SolutionSpec sol(1.0, fleet::ternary_h(), atom(1.0));
  const MinSamples x = sample_min_solution(sol, 20000, 6);
  // P(X > t) = f(t) at a few t
  for (double t : {0.3, 1.0, 2.0}) {
    const double p = static_cast<double>(std::count_if(x.x.begin(), x.x.end(), [&](double v) { return v > t; })) / 2e4;
    CHECK(std::abs(p - sol(t)) <= 4 * std::sqrt(sol(t) * (1 - sol(t)) / 2e4));
  }
}

TEST_CASE("min_step") {
  const std::vector<double> inf(100, std::numeric_limits<double>::infinity());
  for (double v : min_step(inf, fleet::binary_half(), 1)) CHECK(std::isinf(v));

  const SolutionSpec e(1.0, PeriodicH::constant(1.0), atom(1.0));
  const MinSamples x = sample_min_solution(e, 10000, 3);
  const std::vector<double> y = min_step(x.x, fleet::binary_half(), 4);
  const MinSamples ref = sample_min_solution(e, 10000, 5);
  CHECK(ks_two_sample(y, ref.x) <= ks_critical_value(0.001, 10000, 10000));
}

TEST_CASE("sum_step") {
  const std::vector<double> ones(100, 1.0), zeros(100, 0.0);
  for (double v : sum_step(ones, fleet::binary_half(), 1)) CHECK(v == 1.0);
  for (double v : sum_step(zeros, fleet::uniform_pair(), 1)) CHECK(v == 0.0);
  const EmpiricalW w = sample_limit_W(fleet::uniform_pair(), 1.0, 12, 10000, 2);
  const Estimate m = mean_estimate(sum_step(w.samples, fleet::uniform_pair(), 3, 1.0));
  CHECK(std::abs(m.value - 1.0) <= 4 * m.std_error);
}

TEST_CASE("two-sample KS") {
  const std::vector<double> a = {0.3, 1.0, 2.0};
  CHECK(ks_two_sample(a, a) == 0.0);
  CHECK(ks_two_sample(std::vector<double>{0.0}, std::vector<double>{1.0}) == 1.0);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(ks_two_sample(std::vector<double>{1.0, inf}, std::vector<double>{1.0, inf}) == 0.0);
  CHECK_THROWS_AS(ks_two_sample(std::vector<double>{}, a), Error);

  Stream s(7);
  std::vector<double> x(10000), y(10000);
  for (auto& v : x) v = s.exponential();
  for (auto& v : y) v = s.exponential();
  CHECK(ks_two_sample(x, y) <= ks_critical_value(0.001, 10000, 10000));
  CHECK(ks_critical_value(0.001, 10000, 10000) ==
        doctest::Approx(oracle::kKsC001 * std::sqrt(2.0 / 10000)).epsilon(1e-12));
}

TEST_CASE("solution JSON") {
  const PeriodicH h = fleet::ternary_h();
  const PeriodicH back = h_from_json(h_to_json(h), 1.0);
  CHECK(back.values() == h.values());
  CHECK(back.span() == 3.0);
  CHECK(h_from_json(h_to_json(PeriodicH::constant(2.5)), 1.0).is_constant());
  CHECK_THROWS_AS(h_from_json({{"type", "constant"}, {"c", 1.0}, {"x", 2}}, 1.0), Error);
  const SolutionSpec sol(1.0, h, atom(1.0));
  const auto doc = solution_to_json(sol, "w.csv", "abc");
  CHECK(doc["w"]["checksum"] == "abc");
  CHECK(doc["h"]["type"] == "lattice");
}

}
