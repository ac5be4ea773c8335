#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothfix/random.hpp"
#include "smoothfix/stats.hpp"

namespace smoothfix {

// One realization of T with zero entries removed. Every entry is > 0.
using WeightSequence = std::vector<double>;

struct Deterministic {
  std::vector<double> weights;
};

struct MixtureAtom {
  double probability = 0.0;
  std::vector<double> weights;
};

struct FiniteMixture {
  std::vector<MixtureAtom> atoms;
};

struct FixedCount {
  unsigned n = 0;
};
struct PoissonCount {
  double mean = 0.0;
};
// probabilities[k] = P(N = k)
struct CategoricalCount {
  std::vector<double> probabilities;
};
using CountLaw = std::variant<FixedCount, PoissonCount, CategoricalCount>;

struct UniformWeight {
  double lo = 0.0;
  double hi = 1.0;
};
struct FixedWeight {
  double value = 0.0;
};
// exp(mu + sigma Z), Z standard normal
struct LogNormalWeight {
  double mu = 0.0;
  double sigma = 1.0;
};
using ChildWeightLaw = std::variant<UniformWeight, FixedWeight, LogNormalWeight>;

// N drawn from `count`, then N i.i.d. weights from `weight`.
struct IidCount {
  CountLaw count;
  ChildWeightLaw weight;
};

using ModelVariant = std::variant<Deterministic, FiniteMixture, IidCount>;

class WeightModel;

// m(theta) and m'(theta). Either may be +inf.
struct MValue {
  double m = 0.0;
  double m_prime = 0.0;
};

using ExactMFunction = std::function<MValue(const WeightModel&, double theta)>;

// Registers a closed-form m under `name`. Built-ins: "finite_atoms"
// (Deterministic and FiniteMixture) and "iid_product" (IidCount).
void register_exact_m(const std::string& name, ExactMFunction fn);
bool exact_m_registered(const std::string& name);

// The law of the reproduction sequence T.
class WeightModel {
 public:
  // Throws Error(kModelDefinition) on malformed input: mixture probabilities
  // not summing to 1 within 1e-12, negative deterministic weights, a declared
  // lattice span not matching deterministic weights, unknown exact_m.
  explicit WeightModel(ModelVariant variant, double lattice_span = 1.0,
                       std::optional<std::string> exact_m = std::nullopt,
                       std::string name = {});

  const ModelVariant& variant() const noexcept { return variant_; }
  double lattice_span() const noexcept { return lattice_span_; }
  const std::optional<std::string>& exact_m_name() const noexcept {
    return exact_m_;
  }
  const std::string& name() const noexcept { return name_; }
  bool has_exact_m() const noexcept { return exact_m_.has_value(); }

  // Closed-form m at theta, if the model declares one.
  std::optional<MValue> exact_m(double theta) const;

  // Appends one realization of T (zeros dropped) to `out` after clearing it.
  // Throws Error(kModelDefinition) if a child weight law yields a negative
  // value.
  void sample_into(Stream& rng, std::vector<double>& out) const;

  WeightSequence sample(Stream& rng) const {
    WeightSequence w;
    sample_into(rng, w);
    return w;
  }

  // E N, exact for every supported variant.
  double mean_count() const;

  // Structural facts used by the assumption checks.
  bool all_weights_below_one() const;         // (A5)
  bool degenerate_zero_one() const;           // T in {0,1}^N a.s.
  bool declared_lattice_consistent() const;   // meaningful for finite models
  // T is a.s. one fixed sequence, so every tree realization is the same.
  bool point_mass() const;

 private:
  ModelVariant variant_;
  double lattice_span_;
  std::optional<std::string> exact_m_;
  std::string name_;
};

// JSON document: {"variant": {...}, "lattice_span": r, "exact_m": name,
// "name": id}. Unknown keys are rejected.
nlohmann::json to_json(const WeightModel& model);
WeightModel model_from_json(const nlohmann::json& doc);

// Monte Carlo budget. Replication i draws from derive_seed(seed, i).
struct McBudget {
  std::size_t reps = 100000;
  std::uint64_t seed = 1;
  double divergence_cap = 1e12;
};

struct MEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
  bool diverged = false;  // running mean crossed the cap; value = +inf
};

// A frozen batch of sampled T realizations stored as steps -log T_i. Lets
// m and m' be evaluated at many theta on common random numbers.
class SampledM {
 public:
  SampledM(const WeightModel& model, const McBudget& budget);

  MEstimate m(double theta) const;
  MEstimate m_prime(double theta) const;
  // MC mean of Y log+ Y with Y = sum_i T_i^theta, plus the excess kurtosis
  // of the summand.
  MEstimate xlogx(double theta, double* kurtosis = nullptr) const;

  std::size_t reps() const noexcept { return offsets_.size() - 1; }

 private:
  template <class F>
  MEstimate reduce(F&& per_rep) const;

  std::vector<double> steps_;
  std::vector<std::size_t> offsets_;
  double divergence_cap_;
};

MEstimate m_eval(const WeightModel& model, double theta,
                 const McBudget& budget = {});
MEstimate m_prime_eval(const WeightModel& model, double theta,
                       const McBudget& budget = {});

struct Verdict {
  bool holds = false;
  bool heuristic = false;
  bool inconclusive = false;
  std::string evidence;
};

struct AssumptionReport {
  Verdict a1;
  Verdict a2;
  MEstimate mean_count;
  std::optional<double> a3_alpha;
  std::string a3_diagnostic;
  Verdict a4a;
  Verdict a4b;
  MEstimate m_prime_at_alpha;
  MEstimate xlogx_probe;
  Verdict a5;
  double lattice_span = 1.0;
  bool lattice_consistent = true;
};

struct AssumptionOptions {
  McBudget budget;
  std::optional<double> theta_probe;  // for (A4b); default alpha / 2
  double search_max = 16.0;
  double alpha_tol = 1e-12;
  double heavy_tail_kurtosis = 100.0;
};

AssumptionReport check_assumptions(const WeightModel& model,
                                   const AssumptionOptions& options = {});

}  // namespace smoothfix
