#include "smoothfix/branching_tree.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

#include "smoothfix/error.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

const char* to_string(FrontKind kind) noexcept {
  switch (kind) {
    case FrontKind::kGeneration: return "generation";
    case FrontKind::kFirstExit: return "first_exit";
    case FrontKind::kLadder: return "ladder";
  }
  return "generation";
}

std::string format_path(const VertexPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(path[i]);
  }
  return out;
}

Front expand(const Front& front, const RandomTree& tree, const Prune& prune,
             std::size_t max_nodes) {
  if (front.kind != FrontKind::kGeneration)
    throw Error(ErrorCode::kInvalidArgument, "expand: front is not a generation");
  Front next;
  next.kind = FrontKind::kGeneration;
  next.generation = front.generation + 1;
  next.leaked_mass = front.leaked_mass;
  next.nodes_visited = front.nodes_visited;
  std::vector<double> weights;
  for (const auto& node : front.nodes) {
    tree.children(node.key, weights);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double s = node.log_weight - std::log(weights[i]);
      ++next.nodes_visited;
      if (prune.eps > 0.0) {
        const double mass = std::exp(-prune.alpha * s);
        if (mass < prune.eps) {
          next.leaked_mass += mass;
          continue;
        }
      }
      if (next.nodes.size() >= max_nodes)
        throw Error(ErrorCode::kPopulationCap,
                    "population cap exceeded: generation " +
                        std::to_string(next.generation) + " reached " +
                        std::to_string(max_nodes) + " nodes after expanding " +
                        std::to_string(next.nodes_visited) + " vertices");
      WeightedNode child;
      child.path.reserve(node.path.size() + 1);
      child.path = node.path;
      child.path.push_back(static_cast<std::uint32_t>(i + 1));
      child.key = RandomTree::child_key(node.key, static_cast<std::uint32_t>(i + 1));
      child.log_weight = s;
      next.nodes.push_back(std::move(child));
    }
  }
  return next;
}

Front generation_front(const RandomTree& tree, std::size_t n, const Prune& prune,
                       std::size_t max_nodes) {
  Front front;
  front.kind = FrontKind::kGeneration;
  front.nodes.push_back(tree.root());
  front.nodes_visited = 1;
  for (std::size_t g = 0; g < n; ++g) front = expand(front, tree, prune, max_nodes);
  return front;
}

namespace {

Front stopped_front(const RandomTree& tree, double t, const Caps& caps, double alpha,
                    FrontKind kind) {
  if (!(t >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "first_exit_front: t must be >= 0");
  Front front;
  front.kind = kind;
  front.level = t;
  std::vector<WeightedNode> stack{tree.root()};
  front.nodes_visited = 1;
  std::vector<double> weights;
  while (!stack.empty()) {
    WeightedNode node = std::move(stack.back());
    stack.pop_back();
    if (node.log_weight > t) {
      front.nodes.push_back(std::move(node));
      continue;
    }
    if (node.generation() >= caps.max_generation ||
        front.nodes_visited >= caps.max_nodes) {
      front.leaked_mass += node.mass(alpha);
      front.cap_hit = true;
      continue;
    }
    tree.children(node.key, weights);
    for (std::size_t i = weights.size(); i-- > 0;) {
      WeightedNode child;
      child.path.reserve(node.path.size() + 1);
      child.path = node.path;
      child.path.push_back(static_cast<std::uint32_t>(i + 1));
      child.key = RandomTree::child_key(node.key, static_cast<std::uint32_t>(i + 1));
      child.log_weight = node.log_weight - std::log(weights[i]);
      ++front.nodes_visited;
      stack.push_back(std::move(child));
    }
  }
  return front;
}

}  // namespace

Front first_exit_front(const RandomTree& tree, double t, const Caps& caps, double alpha) {
  return stopped_front(tree, t, caps, alpha, FrontKind::kFirstExit);
}

Front ladder_front(const RandomTree& tree, const Caps& caps, double alpha) {
  return stopped_front(tree, 0.0, caps, alpha, FrontKind::kLadder);
}

double sup_weight(const Front& front) {
  if (front.nodes.empty()) return 0.0;
  double min_s = front.nodes.front().log_weight;
  for (const auto& n : front.nodes) min_s = std::min(min_s, n.log_weight);
  return std::exp(-min_s);
}

bool is_antichain(const Front& front) {
  std::vector<const VertexPath*> paths;
  paths.reserve(front.nodes.size());
  for (const auto& n : front.nodes) paths.push_back(&n.path);
  std::sort(paths.begin(), paths.end(),
            [](const VertexPath* a, const VertexPath* b) { return *a < *b; });
  // In lexicographic order a prefix sorts immediately before some extension,
  // and any extension of a sorts before the next non-extension.
  for (std::size_t i = 1; i < paths.size(); ++i) {
    const VertexPath& a = *paths[i - 1];
    const VertexPath& b = *paths[i];
    if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin())) return false;
  }
  return true;
}

double replay_log_weight(const RandomTree& tree, const VertexPath& path) {
  std::uint64_t key = tree.root_key();
  double s = 0.0;
  std::vector<double> weights;
  for (std::uint32_t index : path) {
    tree.children(key, weights);
    if (index == 0 || index > weights.size())
      throw Error(ErrorCode::kInvalidArgument,
                  "replay_log_weight: vertex " + format_path(path) + " does not exist");
    s = s - std::log(weights[index - 1]);
    key = RandomTree::child_key(key, index);
  }
  return s;
}

void write_front_csv(std::ostream& out, const Front& front, double alpha) {
  out << "vertex_path,generation,S,L_alpha_mass\n";
  char buf[64];
  auto num = [&](double x) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
  };
  for (const auto& n : front.nodes)
    out << format_path(n.path) << ',' << n.generation() << ',' << num(n.log_weight)
        << ',' << num(n.mass(alpha)) << '\n';
}

SubtreeMass subtree_mass(const RandomTree& tree, std::uint64_t key, std::size_t depth,
                         double alpha, double eps, std::size_t max_nodes) {
  struct Item {
    std::uint64_t key;
    double s;
    std::size_t gen;
  };
  SubtreeMass out;
  CompensatedSum total, leaked;
  std::vector<Item> stack{{key, 0.0, 0}};
  out.nodes = 1;
  std::vector<double> weights;
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    if (item.gen == depth) {
      total.add(std::exp(-alpha * item.s));
      continue;
    }
    if (out.nodes >= max_nodes) {
      leaked.add(std::exp(-alpha * item.s));
      out.cap_hit = true;
      continue;
    }
    tree.children(item.key, weights);
    for (std::size_t i = weights.size(); i-- > 0;) {
      const double s = item.s - std::log(weights[i]);
      ++out.nodes;
      if (eps > 0.0) {
        const double mass = std::exp(-alpha * s);
        if (mass < eps) {
          leaked.add(mass);
          continue;
        }
      }
      stack.push_back({RandomTree::child_key(item.key, static_cast<std::uint32_t>(i + 1)),
                       s, item.gen + 1});
    }
  }
  out.mass = total.value();
  out.leaked = leaked.value();
  return out;
}

}  // namespace smoothfix
