#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "smoothfix/weight_models.hpp"

namespace smoothfix {

// Ulam-Harris address; child indices are 1-based. The root is empty.
using VertexPath = std::vector<std::uint32_t>;

std::string format_path(const VertexPath& path);

struct WeightedNode {
  VertexPath path;
  std::uint64_t key = 0;    // hash of (tree seed, path); seeds T(v)
  double log_weight = 0.0;  // S(v) = -log L(v)

  std::size_t generation() const noexcept { return path.size(); }
  double weight() const noexcept { return std::exp(-log_weight); }
  double mass(double alpha) const noexcept { return std::exp(-alpha * log_weight); }
};

// The weighted branching model as a random function of the vertex: T(v) is
// drawn from a stream seeded by (seed, v). Two fronts built from the same
// RandomTree therefore live on the same realization. The model must outlive
// the tree.
class RandomTree {
 public:
  RandomTree(const WeightModel& model, std::uint64_t seed)
      : model_(&model), seed_(seed) {}
  RandomTree(WeightModel&&, std::uint64_t) = delete;

  const WeightModel& model() const noexcept { return *model_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t root_key() const noexcept { return mix64(seed_); }
  static std::uint64_t child_key(std::uint64_t parent, std::uint32_t index) noexcept {
    return mix64(parent ^ (0x9e3779b97f4a7c15ULL * index));
  }

  // Weights of v's children in index order (zeros already removed).
  void children(std::uint64_t key, std::vector<double>& out) const {
    Stream rng(key);
    model_->sample_into(rng, out);
  }

  WeightedNode root() const { return {{}, root_key(), 0.0}; }

 private:
  const WeightModel* model_;
  std::uint64_t seed_;
};

enum class FrontKind { kGeneration, kFirstExit, kLadder };

const char* to_string(FrontKind kind) noexcept;

struct Prune {
  double alpha = 1.0;
  double eps = 0.0;  // drop children with L^alpha < eps; 0 disables
};

struct Caps {
  std::size_t max_generation = 64;
  std::size_t max_nodes = 10'000'000;
};

// An antichain of weighted vertices: a generation or a stopping line.
struct Front {
  std::vector<WeightedNode> nodes;
  FrontKind kind = FrontKind::kGeneration;
  std::size_t generation = 0;  // kGeneration
  double level = 0.0;          // kFirstExit: t; kLadder: 0
  double leaked_mass = 0.0;    // alpha-mass lost to pruning or caps
  bool cap_hit = false;
  std::size_t nodes_visited = 0;
};

// Next generation. Throws Error(kPopulationCap) when the new front would hold
// more than max_nodes vertices.
Front expand(const Front& front, const RandomTree& tree, const Prune& prune = {},
             std::size_t max_nodes = Caps{}.max_nodes);

Front generation_front(const RandomTree& tree, std::size_t n, const Prune& prune = {},
                       std::size_t max_nodes = Caps{}.max_nodes);

// First vertex with S(v) > t on every path. Paths still at S <= t after
// max_generation steps, or cut by max_nodes, add their alpha-mass to
// leaked_mass and set cap_hit.
Front first_exit_front(const RandomTree& tree, double t, const Caps& caps = {},
                       double alpha = 1.0);

// First vertex with S(v) > 0, i.e. L(v) < 1, on every path.
Front ladder_front(const RandomTree& tree, const Caps& caps = {}, double alpha = 1.0);

// max L(v) over the front; 0 for an empty front.
double sup_weight(const Front& front);

// Structural antichain check (no vertex a prefix of another).
bool is_antichain(const Front& front);

// S(v) recomputed by replaying T along the path from the root.
double replay_log_weight(const RandomTree& tree, const VertexPath& path);

// CSV: vertex_path,generation,S,L_alpha_mass
void write_front_csv(std::ostream& out, const Front& front, double alpha);

// Result of a pathless depth-first sweep of one subtree.
struct SubtreeMass {
  double mass = 0.0;    // sum of L^alpha at the target depth, relative to the start
  double leaked = 0.0;  // relative alpha-mass pruned on the way
  std::size_t nodes = 0;
  bool cap_hit = false;
};

// Sum of exp(-alpha S) over the depth-`depth` descendants of the vertex
// `key`, with S measured from that vertex. Same pruning rule as expand():
// a child is dropped when its relative mass falls below `eps`. Stops
// expanding (cap_hit) after max_nodes vertices. No paths are materialized.
SubtreeMass subtree_mass(const RandomTree& tree, std::uint64_t key, std::size_t depth,
                         double alpha, double eps = 0.0,
                         std::size_t max_nodes = Caps{}.max_nodes);

// Calls visit(S) for every vertex of generation `depth`, depth first.
template <class Visit>
void visit_generation(const RandomTree& tree, std::size_t depth, Visit&& visit) {
  struct Item {
    std::uint64_t key;
    double s;
    std::size_t gen;
  };
  std::vector<Item> stack{{tree.root_key(), 0.0, 0}};
  std::vector<double> weights;
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    if (item.gen == depth) {
      visit(item.s);
      continue;
    }
    tree.children(item.key, weights);
    for (std::size_t i = weights.size(); i-- > 0;)
      stack.push_back({RandomTree::child_key(item.key, static_cast<std::uint32_t>(i + 1)),
                       item.s - std::log(weights[i]), item.gen + 1});
  }
}

}  // namespace smoothfix
