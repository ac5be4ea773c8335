#include "smoothfix/martingales.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "smoothfix/error.hpp"
#include "smoothfix/parallel.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

EmpiricalW EmpiricalW::atom(double c) {
  EmpiricalW w;
  w.samples = {c};
  w.meta.reps = 1;
  return w;
}

double additive_value(const Front& front, double theta) {
  if (front.nodes.empty()) return 0.0;
  if (theta == 0.0) return static_cast<double>(front.nodes.size());
  double max_exponent = -std::numeric_limits<double>::infinity();
  for (const auto& n : front.nodes) max_exponent = std::max(max_exponent, -theta * n.log_weight);
  CompensatedSum sum;
  for (const auto& n : front.nodes) sum.add(std::exp(-theta * n.log_weight - max_exponent));
  return std::exp(max_exponent + std::log(sum.value()));
}

EmpiricalW sample_limit_W(const WeightModel& model, double alpha, std::size_t depth,
                          std::size_t reps, std::uint64_t seed, double eps,
                          std::size_t max_nodes) {
  if (reps == 0) throw Error(ErrorCode::kInvalidArgument, "sample_limit_W: reps must be > 0");
  EmpiricalW out;
  out.samples.resize(reps);
  std::vector<char> capped(reps, 0);
  auto one = [&](std::size_t i) {
    const RandomTree tree(model, derive_seed(seed, i));
    const SubtreeMass sm = subtree_mass(tree, tree.root_key(), depth, alpha, eps, max_nodes);
    out.samples[i] = sm.mass;
    capped[i] = sm.cap_hit ? 1 : 0;
  };
  if (model.point_mass()) {
    // Every seed yields the same tree, hence the same value.
    one(0);
    std::fill(out.samples.begin() + 1, out.samples.end(), out.samples[0]);
    std::fill(capped.begin() + 1, capped.end(), capped[0]);
  } else {
    parallel_for(reps, one);
  }
  out.meta.model = model.name().empty() ? to_json(model).dump() : model.name();
  out.meta.alpha = alpha;
  out.meta.depth = depth;
  out.meta.eps = eps;
  out.meta.seed = seed;
  out.meta.reps = reps;
  out.meta.capped_reps = static_cast<std::size_t>(std::count(capped.begin(), capped.end(), 1));
  out.meta.cap_warning = out.meta.capped_reps * 100 > reps;
  return out;
}

double multiplicative_value(const Front& front, const std::function<double(double)>& f,
                            double t) {
  double log_product = 0.0;
  for (const auto& n : front.nodes) {
    const double v = f(t * std::exp(-n.log_weight));
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::kContractViolation,
                  "multiplicative_value: f returned " + std::to_string(v) +
                      " outside [0, 1]");
    if (v == 0.0) return 0.0;
    log_product += std::log(v);
  }
  return std::exp(log_product);
}

EndogenyResult endogeny_residual(const WeightModel& model, double alpha,
                                 std::size_t split_gen, std::size_t total_depth,
                                 std::size_t reps, std::uint64_t seed, double eps) {
  if (total_depth <= split_gen)
    throw Error(ErrorCode::kInvalidArgument,
                "endogeny_residual: total_depth must exceed split_gen");
  const std::size_t k = total_depth - split_gen;
  EndogenyResult out;
  out.residuals.resize(reps);
  out.leaked.resize(reps);
  parallel_for(reps, [&](std::size_t r) {
    const RandomTree tree(model, derive_seed(seed, r));
    const SubtreeMass whole = subtree_mass(tree, tree.root_key(), total_depth, alpha, eps);
    const Front split = generation_front(tree, split_gen, Prune{alpha, eps});
    double recombined = 0.0;
    for (const auto& v : split.nodes) {
      const double mass_v = v.mass(alpha);
      const double relative_eps = eps > 0.0 ? eps / mass_v : 0.0;
      recombined += mass_v * subtree_mass(tree, v.key, k, alpha, relative_eps).mass;
    }
    out.residuals[r] = std::abs(whole.mass - recombined);
    out.leaked[r] = whole.leaked;
  });
  RunningStats stats;
  for (double x : out.residuals) stats.add(x);
  out.mean_abs_residual = stats.mean();
  out.std_error = stats.stderr_of_mean();
  return out;
}

// ------------------------------------------------------------------ cache

WCachePaths w_cache_paths(const std::filesystem::path& dir, const std::string& stem) {
  return {dir / (stem + ".csv"), dir / (stem + ".json")};
}

std::string checksum_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string w_csv_bytes(const EmpiricalW& w) {
  std::string out = "w\n";
  char buf[64];
  for (double x : w.samples) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, end);
    out += '\n';
  }
  return out;
}

nlohmann::json w_sidecar(const EmpiricalW& w, const std::string& checksum) {
  return {{"model", w.meta.model}, {"alpha", w.meta.alpha}, {"depth", w.meta.depth},
          {"eps", w.meta.eps},     {"seed", w.meta.seed},   {"reps", w.meta.reps},
          {"capped_reps", w.meta.capped_reps},              {"checksum", checksum}};
}

std::string save_w_cache(const EmpiricalW& w, const WCachePaths& paths) {
  const std::string bytes = w_csv_bytes(w);
  const std::string sum = checksum_hex(bytes);
  if (paths.csv.has_parent_path()) std::filesystem::create_directories(paths.csv.parent_path());
  std::ofstream csv(paths.csv, std::ios::binary);
  std::ofstream side(paths.sidecar, std::ios::binary);
  if (!csv || !side)
    throw Error(ErrorCode::kIo, "cannot write W cache at " + paths.csv.string());
  csv << bytes;
  side << w_sidecar(w, sum).dump(2) << '\n';
  return sum;
}

EmpiricalW load_w_cache(const WCachePaths& paths) {
  std::ifstream csv(paths.csv, std::ios::binary);
  std::ifstream side(paths.sidecar, std::ios::binary);
  if (!csv || !side)
    throw Error(ErrorCode::kIo, "W cache not found at " + paths.csv.string());
  std::stringstream buffer;
  buffer << csv.rdbuf();
  const std::string bytes = buffer.str();
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kChecksum, "W cache sidecar unreadable: " + std::string(e.what()));
  }
  const std::string expected = meta.value("checksum", std::string{});
  const std::string actual = checksum_hex(bytes);
  if (expected != actual)
    throw Error(ErrorCode::kChecksum, "W cache checksum mismatch for " + paths.csv.string() +
                                          ": sidecar " + expected + ", file " + actual);
  EmpiricalW w;
  std::istringstream lines(bytes);
  std::string line;
  std::getline(lines, line);
  if (line != "w") throw Error(ErrorCode::kChecksum, "W cache has unexpected header");
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), x);
    if (ec != std::errc{} && line != "inf")
      throw Error(ErrorCode::kChecksum, "W cache has malformed value '" + line + "'");
    w.samples.push_back(line == "inf" ? std::numeric_limits<double>::infinity() : x);
  }
  w.meta.model = meta.value("model", std::string{});
  w.meta.alpha = meta.value("alpha", 1.0);
  w.meta.depth = meta.value("depth", std::size_t{0});
  w.meta.eps = meta.value("eps", 0.0);
  w.meta.seed = meta.value("seed", std::uint64_t{0});
  w.meta.reps = meta.value("reps", w.samples.size());
  w.meta.capped_reps = meta.value("capped_reps", std::size_t{0});
  w.meta.cap_warning = w.meta.capped_reps * 100 > w.meta.reps;
  return w;
}

}  // namespace smoothfix
