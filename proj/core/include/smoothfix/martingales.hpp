#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothfix/branching_tree.hpp"

namespace smoothfix {

struct WMeta {
  std::string model;  // model name or canonical JSON
  double alpha = 1.0;
  std::size_t depth = 0;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::size_t capped_reps = 0;
  bool cap_warning = false;  // more than 1% of replications hit a cap
};

// Samples approximating the law of the limit W^(alpha). +inf is reserved as
// a sentinel and never produced by additive values.
struct EmpiricalW {
  std::vector<double> samples;
  WMeta meta;

  // A point mass W = c, used for deterministic models where W_n = 1.
  static EmpiricalW atom(double c);
};

// W_n^(theta) over the front: sum of exp(-theta S(v)) by log-sum-exp.
// theta = 0 returns the node count; an empty front gives 0.
double additive_value(const Front& front, double theta);

// reps independent realizations of W_depth^(alpha). Replication i uses the
// tree seeded by derive_seed(seed, i).
EmpiricalW sample_limit_W(const WeightModel& model, double alpha, std::size_t depth,
                          std::size_t reps, std::uint64_t seed, double eps = 0.0,
                          std::size_t max_nodes = Caps{}.max_nodes);

// prod over the front of f(t e^{-S(v)}) in log space; 1 for an empty front.
// Throws Error(kContractViolation) if f leaves [0, 1].
double multiplicative_value(const Front& front, const std::function<double(double)>& f,
                            double t);

struct EndogenyResult {
  double mean_abs_residual = 0.0;
  double std_error = 0.0;
  std::vector<double> residuals;  // per replication
  std::vector<double> leaked;     // per replication, root tree
};

// Per replication: W_{n+k} of the root versus the recombination
// sum_{|v|=n} L(v)^alpha [W_k]_v with every subtree sum computed afresh from
// v. Both sides prune by the same absolute rule L^alpha < eps.
EndogenyResult endogeny_residual(const WeightModel& model, double alpha,
                                 std::size_t split_gen, std::size_t total_depth,
                                 std::size_t reps, std::uint64_t seed, double eps = 0.0);

// EmpiricalW cache: `<stem>.csv` (header "w", one sample per line) and
// `<stem>.json` (model, alpha, depth, eps, seed, reps, checksum of the CSV).
struct WCachePaths {
  std::filesystem::path csv;
  std::filesystem::path sidecar;
};

WCachePaths w_cache_paths(const std::filesystem::path& dir, const std::string& stem);

// FNV-1a 64 of the bytes, as 16 hex digits.
std::string checksum_hex(const std::string& bytes);

std::string w_csv_bytes(const EmpiricalW& w);
nlohmann::json w_sidecar(const EmpiricalW& w, const std::string& checksum);

// Writes both files; returns the CSV checksum.
std::string save_w_cache(const EmpiricalW& w, const WCachePaths& paths);

// Throws Error(kChecksum) when the CSV does not match the sidecar checksum
// and Error(kIo) when a file is missing or unreadable.
EmpiricalW load_w_cache(const WCachePaths& paths);

}  // namespace smoothfix
