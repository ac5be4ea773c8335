#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "fleet.hpp"
#include "oracles.hpp"
#include "smoothfix/branching_tree.hpp"
#include "smoothfix/error.hpp"
#include "smoothfix/martingales.hpp"

using namespace smoothfix;

namespace {

// Structural first-exit property: S > t on the node, S <= t on every strict
// ancestor.
bool first_exit_ok(const RandomTree& tree, const Front& f, double t) {
  for (const auto& v : f.nodes) {
    if (!(v.log_weight > t)) return false;
    VertexPath prefix;
    for (std::size_t k = 0; k + 1 < v.path.size(); ++k) {
      prefix.push_back(v.path[k]);
      if (replay_log_weight(tree, prefix) > t) return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("branching_tree") {

TEST_CASE("expand from the root of binary-half") {
  const WeightModel model = fleet::binary_half();
  const RandomTree tree(model, 1);
  Front root;
  root.nodes.push_back(tree.root());
  const Front next = expand(root, tree);
  REQUIRE(next.nodes.size() == 2);
  for (const auto& v : next.nodes) CHECK(v.log_weight == doctest::Approx(std::log(2.0)));
  CHECK(next.generation == 1);
}

TEST_CASE("generation fronts of deterministic models") {
  const WeightModel bh = fleet::binary_half();
  const RandomTree t1(bh, 1);
  const Front g0 = generation_front(t1, 0);
  REQUIRE(g0.nodes.size() == 1);
  CHECK(g0.nodes[0].path.empty());
  CHECK(g0.nodes[0].log_weight == 0.0);

  const Front g3 = generation_front(t1, 3);
  CHECK(g3.nodes.size() == 8);
  for (const auto& v : g3.nodes) CHECK(v.log_weight == doctest::Approx(3 * std::log(2.0)));
  CHECK(additive_value(g3, 1.0) == doctest::Approx(1.0).epsilon(1e-15));

  const WeightModel tt = fleet::ternary_third();
  const Front g2 = generation_front(RandomTree(tt, 5), 2);
  CHECK(g2.nodes.size() == 9);
  for (const auto& v : g2.nodes) CHECK(v.weight() == doctest::Approx(1.0 / 9).epsilon(1e-14));
}

TEST_CASE("uniform pair generation 10 has 1024 nodes") {
  const WeightModel up = fleet::uniform_pair();
  const Front g = generation_front(RandomTree(up, 3), 10);
  CHECK(g.nodes.size() == 1024);
  CHECK(g.leaked_mass == 0.0);
  CHECK(is_antichain(g));
}

TEST_CASE("extinction gives an empty front with no leak") {
  const WeightModel dead(FiniteMixture{{{1.0, {}}}});
  const Front g = generation_front(RandomTree(dead, 1), 1);
  CHECK(g.nodes.empty());
  CHECK(g.leaked_mass == 0.0);
  CHECK(sup_weight(g) == 0.0);
}

TEST_CASE("pruning moves mass into leaked_mass") {
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 8);
  const Front full = generation_front(tree, 8);
  const Front pruned = generation_front(tree, 8, Prune{1.0, 1e-3});
  CHECK(pruned.nodes.size() < full.nodes.size());
  CHECK(pruned.leaked_mass > 0.0);
}

TEST_CASE("population cap") {
  const WeightModel bh = fleet::binary_half();
  CHECK_THROWS_AS(generation_front(RandomTree(bh, 1), 12, {}, 1000), Error);
}

TEST_CASE("first exit of binary-half at t = 2.5 log 2") {
  const WeightModel bh = fleet::binary_half();
  const RandomTree tree(bh, 1);
  const Front f = first_exit_front(tree, 2.5 * std::log(2.0));
  CHECK(f.nodes.size() == 8);
  for (const auto& v : f.nodes) CHECK(v.generation() == 3);
  CHECK(f.leaked_mass == 0.0);
  CHECK_FALSE(f.cap_hit);
}

TEST_CASE("first exit at t = 0 with weights below one is generation 1") {
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 4);
  const Front f = first_exit_front(tree, 0.0);
  const Front g1 = generation_front(tree, 1);
  REQUIRE(f.nodes.size() == g1.nodes.size());
  for (std::size_t i = 0; i < f.nodes.size(); ++i) CHECK(f.nodes[i].path == g1.nodes[i].path);
}

TEST_CASE("first exit of the [0.2, 1.2] atom at t = 1 matches exhaustive enumeration") {
  const WeightModel atom = fleet::atom_02_12();
  const RandomTree tree(atom, 77);
  Caps caps;
  caps.max_generation = 20;
  const Front f = first_exit_front(tree, 1.0, caps);

  std::vector<oracle::EnumNode> line, unfinished;
  oracle::first_exit_enumerate({0.2, 1.2}, 1.0, 20, line, unfinished);
  std::map<VertexPath, long double> expected;
  for (const auto& v : line) expected[v.path] = v.weight;

  REQUIRE(f.nodes.size() == expected.size());
  for (const auto& v : f.nodes) {
    const auto it = expected.find(v.path);
    REQUIRE(it != expected.end());
    CHECK(v.weight() == doctest::Approx(static_cast<double>(it->second)).epsilon(1e-12));
  }
  // The all-1.2 path never leaves; it and its siblings below depth 20 leak.
  CHECK(f.cap_hit);
  long double leaked = 0.0L;
  for (const auto& v : unfinished) leaked += v.weight;
  CHECK(f.leaked_mass == doctest::Approx(static_cast<double>(leaked)).epsilon(1e-10));
  CHECK(is_antichain(f));
  CHECK(first_exit_ok(tree, f, 1.0));
}

TEST_CASE("ladder fronts") {
  const WeightModel bh = fleet::binary_half();
  const Front l = ladder_front(RandomTree(bh, 1));
  CHECK(l.nodes.size() == 2);
  for (const auto& v : l.nodes) CHECK(v.weight() == doctest::Approx(0.5));

  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 2);
  CHECK(ladder_front(tree).nodes.size() == generation_front(tree, 1).nodes.size());

  const WeightModel supp = fleet::supplemental();
  bool mixed = false;
  for (std::uint64_t s = 0; s < 50 && !mixed; ++s) {
    const RandomTree t(supp, s);
    const Front f = ladder_front(t, {}, oracle::kSupplementalAlpha);
    CHECK(is_antichain(f));
    CHECK(first_exit_ok(t, f, 0.0));
    std::size_t lo = 1000, hi = 0;
    for (const auto& v : f.nodes) {
      lo = std::min(lo, v.generation());
      hi = std::max(hi, v.generation());
    }
    mixed = !f.nodes.empty() && lo != hi;
  }
  CHECK(mixed);
}

TEST_CASE("sup_weight") {
  const WeightModel bh = fleet::binary_half();
  CHECK(sup_weight(generation_front(RandomTree(bh, 1), 5)) ==
        doctest::Approx(1.0 / 32).epsilon(1e-14));
  CHECK(sup_weight(Front{}) == 0.0);

  const WeightModel up = fleet::uniform_pair();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const RandomTree tree(up, s);
    CHECK(sup_weight(generation_front(tree, 10)) < sup_weight(generation_front(tree, 5)));
  }
}

TEST_CASE("additivity: stored S equals the replayed sum of steps") {
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 12);
  const Front g = generation_front(tree, 7);
  for (const auto& v : g.nodes) CHECK(std::abs(v.log_weight - replay_log_weight(tree, v.path)) <= 1e-12);
  const Front f = first_exit_front(tree, 3.0);
  for (const auto& v : f.nodes) CHECK(std::abs(v.log_weight - replay_log_weight(tree, v.path)) <= 1e-12);
}

TEST_CASE("fronts from one tree share its realization") {
  const WeightModel up = fleet::uniform_pair();
  const RandomTree tree(up, 3);
  const Front g4 = generation_front(tree, 4);
  const Front g6 = generation_front(tree, 6);
  std::map<VertexPath, double> s4;
  for (const auto& v : g4.nodes) s4[v.path] = v.log_weight;
  for (const auto& v : g6.nodes) {
    const VertexPath head(v.path.begin(), v.path.begin() + 4);
    CHECK(v.log_weight > s4.at(head));
  }
}

TEST_CASE("leaked mass is zero without pruning or caps") {
  const WeightModel up = fleet::uniform_pair();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Front f = first_exit_front(RandomTree(up, s), 4.0);
    CHECK_FALSE(f.cap_hit);
    CHECK(f.leaked_mass == 0.0);
  }
}

TEST_CASE("antichain check detects a prefix") {
  Front f;
  f.nodes.push_back({{1, 2}, 0, 1.0});
  f.nodes.push_back({{1, 2, 1}, 0, 2.0});
  CHECK_FALSE(is_antichain(f));
  f.nodes.pop_back();
  f.nodes.push_back({{1, 3}, 0, 2.0});
  CHECK(is_antichain(f));
}

TEST_CASE("subtree_mass agrees with the materialized front") {
  const WeightModel up = fleet::uniform_pair();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const RandomTree tree(up, s);
    const double direct = additive_value(generation_front(tree, 9), 1.0);
    const SubtreeMass sm = subtree_mass(tree, tree.root_key(), 9, 1.0);
    CHECK(sm.mass == doctest::Approx(direct).epsilon(1e-12));
    CHECK(sm.leaked == 0.0);
  }
}

TEST_CASE("front CSV") {
  const WeightModel bh = fleet::binary_half();
  std::ostringstream out;
  write_front_csv(out, generation_front(RandomTree(bh, 1), 1), 1.0);
  const std::string csv = out.str();
  CHECK(csv.rfind("vertex_path,generation,S,L_alpha_mass\n", 0) == 0);
  CHECK(csv.find("\n1,1,") != std::string::npos);
  CHECK(csv.find("\n2,1,") != std::string::npos);
  CHECK(format_path({1, 2, 3}) == "1.2.3");
}

}
