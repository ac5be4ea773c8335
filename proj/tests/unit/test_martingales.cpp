#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fleet.hpp"
#include "oracles.hpp"
#include "smoothfix/error.hpp"
#include "smoothfix/martingales.hpp"

using namespace smoothfix;
namespace fs = std::filesystem;

TEST_SUITE("martingales") {

TEST_CASE("additive values of binary-half generation 7") {
  const WeightModel bh = fleet::binary_half();
  const Front g = generation_front(RandomTree(bh, 1), 7);
  CHECK(additive_value(g, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(additive_value(g, 2.0) == doctest::Approx(1.0 / 128).epsilon(1e-14));
  CHECK(additive_value(g, 0.0) == 128.0);
  CHECK(additive_value(Front{}, 1.0) == 0.0);
}

TEST_CASE("log-sum-exp survives masses that underflow one by one") {
  Front f;
  for (int i = 0; i < 4; ++i) f.nodes.push_back({{}, 0, 800.0});
  CHECK(additive_value(f, 1.0) == 0.0);  // 4 e^{-800} is below the smallest double
  Front g;
  for (int i = 0; i < 4; ++i) g.nodes.push_back({{}, 0, 700.0});
  CHECK(additive_value(g, 1.0) == doctest::Approx(4 * std::exp(-700.0)).epsilon(1e-12));
}

TEST_CASE("sample_limit_W on deterministic models is exactly 1") {
  for (std::size_t depth : {0u, 3u, 9u}) {
    const EmpiricalW w = sample_limit_W(fleet::binary_half(), 1.0, depth, 50, 4);
    for (double x : w.samples) CHECK(std::abs(x - 1.0) <= 1e-12);
  }
  const EmpiricalW w0 = sample_limit_W(fleet::uniform_pair(), 1.0, 0, 20, 4);
  for (double x : w0.samples) CHECK(x == 1.0);
}

TEST_CASE("point-mass laws reuse one replication without changing the values") {
  CHECK(fleet::binary_half().point_mass());
  CHECK(fleet::atom_02_12().point_mass());
  CHECK_FALSE(fleet::supplemental().point_mass());
  CHECK_FALSE(fleet::uniform_pair().point_mass());
  const WeightModel tt = fleet::ternary_third();
  const EmpiricalW w = sample_limit_W(tt, 1.0, 5, 40, 8);
  for (std::size_t i : {0u, 13u, 39u}) {
    const RandomTree tree(tt, derive_seed(8, i));
    CHECK(w.samples[i] ==
          subtree_mass(tree, tree.root_key(), 5, 1.0, 0.0, Caps{}.max_nodes).mass);
  }
}

TEST_CASE("uniform pair W_12 mean within 4 stderr of 1") {
  const EmpiricalW w = sample_limit_W(fleet::uniform_pair(), 1.0, 12, 10000, 21);
  const Estimate e = mean_estimate(w.samples);
  CHECK(std::abs(e.value - 1.0) <= 4 * e.std_error);
  CHECK(w.meta.reps == 10000);
  CHECK(w.meta.depth == 12);
  CHECK_FALSE(w.meta.cap_warning);
}

TEST_CASE("sample_limit_W is a function of (seed, index) only") {
  const EmpiricalW a = sample_limit_W(fleet::uniform_pair(), 1.0, 6, 100, 99);
  const EmpiricalW b = sample_limit_W(fleet::uniform_pair(), 1.0, 6, 100, 99);
  CHECK(a.samples == b.samples);
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, derive_seed(99, 17));
  CHECK(a.samples[17] == doctest::Approx(additive_value(generation_front(tree, 6), 1.0)).epsilon(1e-13));
}

TEST_CASE("node cap sets the warning") {
  const EmpiricalW w = sample_limit_W(fleet::binary_half(), 1.0, 10, 10, 1, 0.0, 100);
  CHECK(w.meta.capped_reps == 10);
  CHECK(w.meta.cap_warning);
}

TEST_CASE("multiplicative martingale on binary-half with f = exp(-t)") {
  const WeightModel bh = fleet::binary_half();
  const RandomTree tree(bh, 1);
  const auto f = [](double t) { return std::exp(-t); };
  for (std::size_t n : {0u, 1u, 5u, 9u})
    CHECK(multiplicative_value(generation_front(tree, n), f, 1.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(multiplicative_value(first_exit_front(tree, 5.0), f, 1.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(multiplicative_value(generation_front(tree, 4), [](double) { return 1.0; }, 2.0) == 1.0);
}

TEST_CASE("multiplicative_value rejects f outside [0, 1]") {
  const WeightModel bh = fleet::binary_half();
  CHECK_THROWS_AS(multiplicative_value(generation_front(RandomTree(bh, 1), 2),
                                       [](double) { return 1.5; }, 1.0),
                  Error);
}

TEST_CASE("multiplicative martingale mean equals f(t) for uniform pair") {
  // f(t) = E exp(-W t) with W the limit; use the frozen-sample solution
  // f(t) ~ mean over the same trees at a deep generation.
  const WeightModel up = fleet::uniform_pair();
  const EmpiricalW w = sample_limit_W(up, 1.0, 14, 4000, 5);
  auto f = [&](double t) {
    double s = 0.0;
    for (double x : w.samples) s += std::exp(-x * t);
    return s / static_cast<double>(w.samples.size());
  };
  for (double t : {0.5, 2.0}) {
    RunningStats stats;
    for (std::uint64_t r = 0; r < 4000; ++r)
      stats.add(multiplicative_value(generation_front(RandomTree(up, derive_seed(77, r)), 3), f, t));
    CHECK(std::abs(stats.mean() - f(t)) <= 4 * stats.stderr_of_mean() + 0.01);
  }
}

TEST_CASE("multiplicative value is non-increasing in t on a fixed tree") {
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 8);
  const Front g = generation_front(tree, 6);
  const auto f = [](double t) { return std::exp(-t); };
  double previous = 1.0;
  for (double t = 0.01; t < 50; t *= 1.5) {
    const double v = multiplicative_value(g, f, t);
    CHECK(v <= previous);
    previous = v;
  }
}

TEST_CASE("endogeny at eps = 0 is exact up to rounding") {
  for (const auto& model : {fleet::binary_half(), fleet::ternary_third(), fleet::uniform_pair()}) {
    const EndogenyResult r = endogeny_residual(model, 1.0, 4, 12, 30, 3);
    for (double x : r.residuals) CHECK(x <= 1e-10);
  }
}

TEST_CASE("endogeny with eps = 1e-12 on binary-half prunes nothing") {
  const EndogenyResult r = endogeny_residual(fleet::binary_half(), 1.0, 4, 12, 5, 3, 1e-12);
  for (double x : r.residuals) CHECK(x <= 1e-13);
  for (double l : r.leaked) CHECK(l == 0.0);
}

TEST_CASE("endogeny residual bounded by the leaked mass") {
  const EndogenyResult r = endogeny_residual(fleet::uniform_pair(), 1.0, 4, 12, 100, 3, 1e-6);
  bool any_leak = false;
  for (std::size_t i = 0; i < r.residuals.size(); ++i) {
    CHECK(r.residuals[i] <= r.leaked[i] + 1e-12);
    any_leak = any_leak || r.leaked[i] > 0.0;
  }
  CHECK(any_leak);
}

TEST_CASE("W cache round trip and checksum refusal") {
  const fs::path dir = fs::temp_directory_path() / "smoothfix_unit_cache";
  fs::remove_all(dir);
  const EmpiricalW w = sample_limit_W(fleet::uniform_pair(), 1.0, 5, 200, 8);
  const WCachePaths paths = w_cache_paths(dir, "w_test");
  const std::string sum = save_w_cache(w, paths);
  CHECK(sum.size() == 16);
  const EmpiricalW back = load_w_cache(paths);
  CHECK(back.samples == w.samples);
  CHECK(back.meta.depth == 5);
  CHECK(back.meta.seed == 8);

  {
    std::ofstream corrupt(paths.csv, std::ios::app);
    corrupt << "0.5\n";
  }
  try {
    load_w_cache(paths);
    FAIL("expected a checksum error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kChecksum);
  }
  CHECK_THROWS_AS(load_w_cache(w_cache_paths(dir, "missing")), Error);
  fs::remove_all(dir);
}

TEST_CASE("checksum is FNV-1a 64") {
  CHECK(checksum_hex("") == "cbf29ce484222325");
  CHECK(checksum_hex("a") == "af63dc4c8601ec8c");
}

}
