#include "smoothfix/weight_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include "smoothfix/error.hpp"
#include "smoothfix/exponent.hpp"
#include "smoothfix/parallel.hpp"

namespace smoothfix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void model_error(const std::string& what) {
  throw Error(ErrorCode::kModelDefinition, what);
}

// sum_{w > 0} w^theta and sum w^theta log w
MValue atom_m(const std::vector<double>& weights, double theta) {
  MValue out;
  for (double w : weights) {
    if (w <= 0.0) continue;
    const double p = std::pow(w, theta);
    out.m += p;
    out.m_prime += p * std::log(w);
  }
  return out;
}

// E X^theta and E X^theta log X for one child weight.
MValue child_moment(const ChildWeightLaw& law, double theta) {
  return std::visit(
      Overloaded{
          [&](const UniformWeight& u) -> MValue {
            if (u.hi == u.lo) return atom_m({u.hi}, theta);
            const double a = theta + 1.0;
            auto antiderivative = [&](double x) {
              return x > 0.0 ? std::pow(x, a) / a : 0.0;
            };
            auto antiderivative_log = [&](double x) {
              return x > 0.0 ? std::pow(x, a) * (std::log(x) / a - 1.0 / (a * a))
                             : 0.0;
            };
            const double width = u.hi - u.lo;
            return {(antiderivative(u.hi) - antiderivative(u.lo)) / width,
                    (antiderivative_log(u.hi) - antiderivative_log(u.lo)) / width};
          },
          [&](const FixedWeight& f) -> MValue { return atom_m({f.value}, theta); },
          [&](const LogNormalWeight& l) -> MValue {
            const double mgf =
                std::exp(theta * l.mu + 0.5 * theta * theta * l.sigma * l.sigma);
            return {mgf, (l.mu + theta * l.sigma * l.sigma) * mgf};
          },
      },
      law);
}

double count_mean(const CountLaw& law) {
  return std::visit(
      Overloaded{
          [](const FixedCount& c) { return static_cast<double>(c.n); },
          [](const PoissonCount& c) { return c.mean; },
          [](const CategoricalCount& c) {
            double s = 0.0;
            for (std::size_t k = 0; k < c.probabilities.size(); ++k)
              s += static_cast<double>(k) * c.probabilities[k];
            return s;
          },
      },
      law);
}

MValue finite_atoms_m(const WeightModel& model, double theta) {
  return std::visit(
      Overloaded{
          [&](const Deterministic& d) { return atom_m(d.weights, theta); },
          [&](const FiniteMixture& mix) {
            MValue out;
            for (const auto& atom : mix.atoms) {
              const MValue a = atom_m(atom.weights, theta);
              out.m += atom.probability * a.m;
              out.m_prime += atom.probability * a.m_prime;
            }
            return out;
          },
          [](const IidCount&) -> MValue {
            model_error("exact_m 'finite_atoms' requires a finite model");
          },
      },
      model.variant());
}

MValue iid_product_m(const WeightModel& model, double theta) {
  const auto* iid = std::get_if<IidCount>(&model.variant());
  if (iid == nullptr) model_error("exact_m 'iid_product' requires IidCount");
  const double en = count_mean(iid->count);
  const MValue x = child_moment(iid->weight, theta);
  return {en * x.m, en * x.m_prime};
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, ExactMFunction> functions{
      {"finite_atoms", finite_atoms_m},
      {"iid_product", iid_product_m},
  };
};

Registry& registry() {
  static Registry r;
  return r;
}

ExactMFunction lookup_exact_m(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.functions.find(name);
  return it == r.functions.end() ? ExactMFunction{} : it->second;
}

bool in_lattice(double w, double r) {
  const double k = std::log(w) / std::log(r);
  return std::abs(k - std::round(k)) <= 1e-9 * std::max(1.0, std::abs(k));
}

void check_weights(const std::vector<double>& weights, const char* where) {
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w))
      model_error(std::string(where) + ": weights must be finite and >= 0");
}

void validate(const ModelVariant& variant) {
  std::visit(
      Overloaded{
          [](const Deterministic& d) { check_weights(d.weights, "Deterministic"); },
          [](const FiniteMixture& mix) {
            if (mix.atoms.empty()) model_error("FiniteMixture: no atoms");
            double total = 0.0;
            for (const auto& atom : mix.atoms) {
              if (!(atom.probability >= 0.0))
                model_error("FiniteMixture: negative probability");
              check_weights(atom.weights, "FiniteMixture");
              total += atom.probability;
            }
            if (std::abs(total - 1.0) > 1e-12)
              model_error("FiniteMixture: probabilities sum to " +
                          std::to_string(total) + ", expected 1");
          },
          [](const IidCount& iid) {
            std::visit(Overloaded{
                           [](const FixedCount&) {},
                           [](const PoissonCount& p) {
                             if (!(p.mean >= 0.0) || !std::isfinite(p.mean))
                               model_error("PoissonCount: mean must be >= 0");
                           },
                           [](const CategoricalCount& c) {
                             double total = 0.0;
                             for (double p : c.probabilities) {
                               if (!(p >= 0.0))
                                 model_error("CategoricalCount: negative probability");
                               total += p;
                             }
                             if (std::abs(total - 1.0) > 1e-12)
                               model_error("CategoricalCount: probabilities must sum to 1");
                           },
                       },
                       iid.count);
            std::visit(Overloaded{
                           [](const UniformWeight& u) {
                             if (!(u.lo <= u.hi) || !std::isfinite(u.hi))
                               model_error("UniformWeight: need lo <= hi");
                           },
                           [](const FixedWeight& f) {
                             if (!std::isfinite(f.value))
                               model_error("FixedWeight: value must be finite");
                           },
                           [](const LogNormalWeight& l) {
                             if (!(l.sigma >= 0.0))
                               model_error("LogNormalWeight: sigma must be >= 0");
                           },
                       },
                       iid.weight);
          },
      },
      variant);
}

void append_positive(const std::vector<double>& weights, std::vector<double>& out) {
  for (double w : weights)
    if (w > 0.0) out.push_back(w);
}

}  // namespace

void register_exact_m(const std::string& name, ExactMFunction fn) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.functions[name] = std::move(fn);
}

bool exact_m_registered(const std::string& name) {
  return static_cast<bool>(lookup_exact_m(name));
}

WeightModel::WeightModel(ModelVariant variant, double lattice_span,
                         std::optional<std::string> exact_m, std::string name)
    : variant_(std::move(variant)),
      lattice_span_(lattice_span),
      exact_m_(std::move(exact_m)),
      name_(std::move(name)) {
  validate(variant_);
  if (!(lattice_span_ >= 1.0) || !std::isfinite(lattice_span_))
    model_error("lattice_span must be a finite real >= 1");
  if (exact_m_) {
    if (!exact_m_registered(*exact_m_))
      model_error("unknown exact_m '" + *exact_m_ + "'");
    const bool finite = !std::holds_alternative<IidCount>(variant_);
    if (*exact_m_ == "finite_atoms" && !finite)
      model_error("exact_m 'finite_atoms' requires Deterministic or FiniteMixture");
    if (*exact_m_ == "iid_product" && finite)
      model_error("exact_m 'iid_product' requires IidCount");
  }
  if (!declared_lattice_consistent())
    model_error("declared lattice_span " + std::to_string(lattice_span_) +
                " does not contain every weight");
}

std::optional<MValue> WeightModel::exact_m(double theta) const {
  if (!exact_m_) return std::nullopt;
  return lookup_exact_m(*exact_m_)(*this, theta);
}

void WeightModel::sample_into(Stream& rng, std::vector<double>& out) const {
  out.clear();
  std::visit(
      Overloaded{
          [&](const Deterministic& d) { append_positive(d.weights, out); },
          [&](const FiniteMixture& mix) {
            const double u = rng.uniform();
            double cumulative = 0.0;
            const MixtureAtom* chosen = &mix.atoms.back();
            for (const auto& atom : mix.atoms) {
              cumulative += atom.probability;
              if (u < cumulative) {
                chosen = &atom;
                break;
              }
            }
            append_positive(chosen->weights, out);
          },
          [&](const IidCount& iid) {
            const unsigned n = std::visit(
                Overloaded{
                    [](const FixedCount& c) { return c.n; },
                    [&](const PoissonCount& c) {
                      if (c.mean == 0.0) return 0u;
                      std::poisson_distribution<unsigned> dist(c.mean);
                      return dist(rng);
                    },
                    [&](const CategoricalCount& c) {
                      const double u = rng.uniform();
                      double cumulative = 0.0;
                      for (std::size_t k = 0; k < c.probabilities.size(); ++k) {
                        cumulative += c.probabilities[k];
                        if (u < cumulative) return static_cast<unsigned>(k);
                      }
                      return static_cast<unsigned>(c.probabilities.size() - 1);
                    },
                },
                iid.count);
            out.reserve(n);
            for (unsigned i = 0; i < n; ++i) {
              const double w = std::visit(
                  Overloaded{
                      [&](const UniformWeight& u) { return rng.uniform(u.lo, u.hi); },
                      [](const FixedWeight& f) { return f.value; },
                      [&](const LogNormalWeight& l) {
                        std::normal_distribution<double> z(0.0, 1.0);
                        return std::exp(l.mu + l.sigma * z(rng));
                      },
                  },
                  iid.weight);
              if (!(w > 0.0))
                model_error("IidCount weight law produced non-positive value " +
                            std::to_string(w));
              out.push_back(w);
            }
          },
      },
      variant_);
}

double WeightModel::mean_count() const {
  return std::visit(
      Overloaded{
          [](const Deterministic& d) {
            return static_cast<double>(
                std::count_if(d.weights.begin(), d.weights.end(),
                              [](double w) { return w > 0.0; }));
          },
          [](const FiniteMixture& mix) {
            double s = 0.0;
            for (const auto& atom : mix.atoms)
              s += atom.probability *
                   static_cast<double>(std::count_if(
                       atom.weights.begin(), atom.weights.end(),
                       [](double w) { return w > 0.0; }));
            return s;
          },
          [](const IidCount& iid) { return count_mean(iid.count); },
      },
      variant_);
}

bool WeightModel::all_weights_below_one() const {
  auto below = [](const std::vector<double>& ws) {
    return std::all_of(ws.begin(), ws.end(), [](double w) { return w < 1.0; });
  };
  return std::visit(
      Overloaded{
          [&](const Deterministic& d) { return below(d.weights); },
          [&](const FiniteMixture& mix) {
            return std::all_of(mix.atoms.begin(), mix.atoms.end(),
                               [&](const MixtureAtom& a) {
                                 return a.probability == 0.0 || below(a.weights);
                               });
          },
          [](const IidCount& iid) {
            return std::visit(Overloaded{
                                  [](const UniformWeight& u) {
                                    return u.lo < u.hi ? u.hi <= 1.0 : u.hi < 1.0;
                                  },
                                  [](const FixedWeight& f) { return f.value < 1.0; },
                                  [](const LogNormalWeight&) { return false; },
                              },
                              iid.weight);
          },
      },
      variant_);
}

bool WeightModel::point_mass() const {
  if (std::holds_alternative<Deterministic>(variant_)) return true;
  if (const auto* mix = std::get_if<FiniteMixture>(&variant_))
    return std::count_if(mix->atoms.begin(), mix->atoms.end(),
                         [](const MixtureAtom& a) { return a.probability > 0.0; }) == 1;
  return false;
}

bool WeightModel::degenerate_zero_one() const {
  auto zero_one = [](const std::vector<double>& ws) {
    return std::all_of(ws.begin(), ws.end(),
                       [](double w) { return w == 0.0 || w == 1.0; });
  };
  return std::visit(
      Overloaded{
          [&](const Deterministic& d) { return zero_one(d.weights); },
          [&](const FiniteMixture& mix) {
            return std::all_of(mix.atoms.begin(), mix.atoms.end(),
                               [&](const MixtureAtom& a) {
                                 return a.probability == 0.0 || zero_one(a.weights);
                               });
          },
          [](const IidCount& iid) {
            if (std::holds_alternative<FixedCount>(iid.count) &&
                std::get<FixedCount>(iid.count).n == 0)
              return true;
            return std::visit(
                Overloaded{
                    [](const UniformWeight& u) { return u.lo == u.hi && u.hi == 1.0; },
                    [](const FixedWeight& f) { return f.value == 1.0; },
                    [](const LogNormalWeight& l) { return l.sigma == 0.0 && l.mu == 0.0; },
                },
                iid.weight);
          },
      },
      variant_);
}

bool WeightModel::declared_lattice_consistent() const {
  if (lattice_span_ == 1.0) return true;
  auto all_in = [&](const std::vector<double>& ws) {
    return std::all_of(ws.begin(), ws.end(), [&](double w) {
      return w == 0.0 || in_lattice(w, lattice_span_);
    });
  };
  return std::visit(
      Overloaded{
          [&](const Deterministic& d) { return all_in(d.weights); },
          [&](const FiniteMixture& mix) {
            return std::all_of(mix.atoms.begin(), mix.atoms.end(),
                               [&](const MixtureAtom& a) {
                                 return a.probability == 0.0 || all_in(a.weights);
                               });
          },
          [](const IidCount&) { return true; },  // trusted by declaration
      },
      variant_);
}

// ---------------------------------------------------------------- sampling m

SampledM::SampledM(const WeightModel& model, const McBudget& budget)
    : divergence_cap_(budget.divergence_cap) {
  if (budget.reps == 0)
    throw Error(ErrorCode::kInvalidArgument, "Monte Carlo budget needs reps > 0");
  std::vector<WeightSequence> draws(budget.reps);
  parallel_for(budget.reps, [&](std::size_t i) {
    Stream rng(derive_seed(budget.seed, i));
    model.sample_into(rng, draws[i]);
  });
  offsets_.reserve(budget.reps + 1);
  offsets_.push_back(0);
  for (const auto& d : draws) {
    for (double w : d) steps_.push_back(-std::log(w));
    offsets_.push_back(steps_.size());
  }
}

template <class F>
MEstimate SampledM::reduce(F&& per_rep) const {
  RunningStats stats;
  for (std::size_t r = 0; r + 1 < offsets_.size(); ++r) {
    stats.add(per_rep(r));
    if (stats.mean() > divergence_cap_ || !std::isfinite(stats.mean()))
      return {kInf, kInf, false, true};
  }
  return {stats.mean(), stats.stderr_of_mean(), false, false};
}

MEstimate SampledM::m(double theta) const {
  return reduce([&](std::size_t r) {
    double s = 0.0;
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      s += theta == 0.0 ? 1.0 : std::exp(-theta * steps_[k]);
    return s;
  });
}

MEstimate SampledM::m_prime(double theta) const {
  return reduce([&](std::size_t r) {
    double s = 0.0;
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      s -= std::exp(-theta * steps_[k]) * steps_[k];
    return s;
  });
}

MEstimate SampledM::xlogx(double theta, double* kurtosis) const {
  std::vector<double> values(reps());
  for (std::size_t r = 0; r < reps(); ++r) {
    double y = 0.0;
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      y += std::exp(-theta * steps_[k]);
    values[r] = y > 1.0 ? y * std::log(y) : 0.0;
  }
  if (kurtosis != nullptr) *kurtosis = excess_kurtosis(values);
  return reduce([&](std::size_t r) { return values[r]; });
}

MEstimate m_eval(const WeightModel& model, double theta, const McBudget& budget) {
  if (!(theta >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "m_eval: theta must be >= 0");
  if (auto exact = model.exact_m(theta))
    return {exact->m, 0.0, true, std::isinf(exact->m)};
  return SampledM(model, budget).m(theta);
}

MEstimate m_prime_eval(const WeightModel& model, double theta,
                       const McBudget& budget) {
  if (!(theta >= 0.0))
    throw Error(ErrorCode::kInvalidArgument, "m_prime_eval: theta must be >= 0");
  if (auto exact = model.exact_m(theta))
    return {exact->m_prime, 0.0, true, std::isinf(exact->m_prime)};
  return SampledM(model, budget).m_prime(theta);
}

// ------------------------------------------------------------- assumptions

namespace {

std::string fmt_estimate(const MEstimate& e) {
  if (e.diverged) return "+inf (heuristic: running mean above cap)";
  std::string s = std::to_string(e.value);
  if (e.exact) return s + " (exact)";
  return s + " +- " + std::to_string(e.std_error);
}

}  // namespace

AssumptionReport check_assumptions(const WeightModel& model,
                                   const AssumptionOptions& options) {
  AssumptionReport report;
  report.lattice_span = model.lattice_span();
  report.lattice_consistent = model.declared_lattice_consistent();

  report.a1.holds = !model.degenerate_zero_one();
  report.a1.evidence = report.a1.holds ? "some weight outside {0,1} with positive probability"
                                       : "T in {0,1}^N almost surely";

  report.mean_count = {model.mean_count(), 0.0, true, false};
  report.a2.holds = report.mean_count.value > 1.0;
  report.a2.evidence = "E N = " + fmt_estimate(report.mean_count);

  report.a5.holds = model.all_weights_below_one();
  report.a5.evidence = report.a5.holds ? "every weight < 1 almost surely"
                                       : "weights >= 1 occur with positive probability";

  if (!report.a2.holds) {
    report.a3_diagnostic = "E N <= 1: no alpha with m > 1 to its left";
    report.a4a.evidence = report.a4b.evidence = "requires alpha";
    return report;
  }

  FindAlphaOptions fa;
  fa.search_max = options.search_max;
  fa.tol = options.alpha_tol;
  fa.budget = options.budget;
  std::optional<CharacteristicExponent> ce;
  try {
    ce = find_alpha(model, fa);
    report.a3_alpha = ce->alpha;
  } catch (const Error& e) {
    report.a3_diagnostic = e.what();
    report.a4a.evidence = report.a4b.evidence = "requires alpha";
    return report;
  }

  const double alpha = ce->alpha;
  report.m_prime_at_alpha = m_prime_eval(model, alpha, options.budget);
  const SampledM sampled(model, options.budget);
  double kurtosis = 0.0;
  report.xlogx_probe = sampled.xlogx(alpha, &kurtosis);
  const bool heavy = kurtosis > options.heavy_tail_kurtosis;
  const auto& mp = report.m_prime_at_alpha;
  const bool negative_slope = mp.value + 3.0 * mp.std_error < 0.0;
  report.a4a.heuristic = !mp.exact;
  if (report.xlogx_probe.diverged) {
    report.a4a.holds = false;
    report.a4a.heuristic = true;
    report.a4a.evidence = "x log x moment probe diverged";
  } else {
    report.a4a.holds = negative_slope && !heavy;
    report.a4a.inconclusive = negative_slope && heavy;
    report.a4a.evidence = "m'(alpha) = " + fmt_estimate(mp) +
                          "; E Y log+ Y = " + fmt_estimate(report.xlogx_probe) +
                          (heavy ? " [heavy-tailed summand, kurtosis " +
                                       std::to_string(kurtosis) + "]"
                                 : "");
  }

  const double probe = options.theta_probe.value_or(alpha / 2.0);
  if (!(probe >= 0.0 && probe < alpha)) {
    report.a4b.evidence = "theta_probe must lie in [0, alpha)";
  } else {
    const MEstimate mp_probe = m_eval(model, probe, options.budget);
    report.a4b.holds = !mp_probe.diverged && std::isfinite(mp_probe.value);
    report.a4b.heuristic = !mp_probe.exact;
    report.a4b.evidence =
        "m(" + std::to_string(probe) + ") = " + fmt_estimate(mp_probe);
  }
  return report;
}

// -------------------------------------------------------------------- JSON

namespace {

using nlohmann::json;

void require_keys(const json& doc, std::initializer_list<const char*> allowed,
                  std::initializer_list<const char*> required,
                  const std::string& where) {
  if (!doc.is_object()) throw Error(ErrorCode::kConfig, where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : doc.items())
    if (!ok.count(key))
      throw Error(ErrorCode::kConfig, where + ": unknown field '" + key + "'");
  for (const char* key : required)
    if (!doc.contains(key))
      throw Error(ErrorCode::kConfig, where + ": missing field '" + key + "'");
}

std::vector<double> weights_from(const json& v, const std::string& where) {
  if (!v.is_array()) throw Error(ErrorCode::kConfig, where + ": weights must be an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorCode::kConfig, where + ": weights must be numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

json count_to_json(const CountLaw& law) {
  return std::visit(Overloaded{
                        [](const FixedCount& c) { return json{{"type", "fixed"}, {"n", c.n}}; },
                        [](const PoissonCount& c) {
                          return json{{"type", "poisson"}, {"mean", c.mean}};
                        },
                        [](const CategoricalCount& c) {
                          return json{{"type", "categorical"}, {"probabilities", c.probabilities}};
                        },
                    },
                    law);
}

json weight_to_json(const ChildWeightLaw& law) {
  return std::visit(
      Overloaded{
          [](const UniformWeight& u) { return json{{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}}; },
          [](const FixedWeight& f) { return json{{"type", "fixed"}, {"value", f.value}}; },
          [](const LogNormalWeight& l) {
            return json{{"type", "lognormal"}, {"mu", l.mu}, {"sigma", l.sigma}};
          },
      },
      law);
}

CountLaw count_from_json(const json& doc) {
  const std::string where = "model.variant.count";
  if (!doc.is_object() || !doc.contains("type"))
    throw Error(ErrorCode::kConfig, where + ": missing 'type'");
  const auto type = doc.at("type").get<std::string>();
  if (type == "fixed") {
    require_keys(doc, {"type", "n"}, {"n"}, where);
    return FixedCount{doc.at("n").get<unsigned>()};
  }
  if (type == "poisson") {
    require_keys(doc, {"type", "mean"}, {"mean"}, where);
    return PoissonCount{doc.at("mean").get<double>()};
  }
  if (type == "categorical") {
    require_keys(doc, {"type", "probabilities"}, {"probabilities"}, where);
    return CategoricalCount{weights_from(doc.at("probabilities"), where)};
  }
  throw Error(ErrorCode::kConfig, where + ": unknown type '" + type + "'");
}

ChildWeightLaw weight_from_json(const json& doc) {
  const std::string where = "model.variant.weight";
  if (!doc.is_object() || !doc.contains("type"))
    throw Error(ErrorCode::kConfig, where + ": missing 'type'");
  const auto type = doc.at("type").get<std::string>();
  if (type == "uniform") {
    require_keys(doc, {"type", "lo", "hi"}, {"lo", "hi"}, where);
    return UniformWeight{doc.at("lo").get<double>(), doc.at("hi").get<double>()};
  }
  if (type == "fixed") {
    require_keys(doc, {"type", "value"}, {"value"}, where);
    return FixedWeight{doc.at("value").get<double>()};
  }
  if (type == "lognormal") {
    require_keys(doc, {"type", "mu", "sigma"}, {"mu", "sigma"}, where);
    return LogNormalWeight{doc.at("mu").get<double>(), doc.at("sigma").get<double>()};
  }
  throw Error(ErrorCode::kConfig, where + ": unknown type '" + type + "'");
}

}  // namespace

nlohmann::json to_json(const WeightModel& model) {
  json variant = std::visit(
      Overloaded{
          [](const Deterministic& d) {
            return json{{"type", "deterministic"}, {"weights", d.weights}};
          },
          [](const FiniteMixture& mix) {
            json atoms = json::array();
            for (const auto& a : mix.atoms)
              atoms.push_back({{"probability", a.probability}, {"weights", a.weights}});
            return json{{"type", "finite_mixture"}, {"atoms", atoms}};
          },
          [](const IidCount& iid) {
            return json{{"type", "iid_count"},
                        {"count", count_to_json(iid.count)},
                        {"weight", weight_to_json(iid.weight)}};
          },
      },
      model.variant());
  json doc{{"variant", variant}, {"lattice_span", model.lattice_span()}};
  if (model.exact_m_name()) doc["exact_m"] = *model.exact_m_name();
  if (!model.name().empty()) doc["name"] = model.name();
  return doc;
}

WeightModel model_from_json(const nlohmann::json& doc) {
  try {
    require_keys(doc, {"variant", "lattice_span", "exact_m", "name"}, {"variant"}, "model");
    const json& v = doc.at("variant");
    if (!v.is_object() || !v.contains("type"))
      throw Error(ErrorCode::kConfig, "model.variant: missing 'type'");
    const auto type = v.at("type").get<std::string>();
    ModelVariant variant;
    if (type == "deterministic") {
      require_keys(v, {"type", "weights"}, {"weights"}, "model.variant");
      variant = Deterministic{weights_from(v.at("weights"), "model.variant")};
    } else if (type == "finite_mixture") {
      require_keys(v, {"type", "atoms"}, {"atoms"}, "model.variant");
      FiniteMixture mix;
      for (const auto& a : v.at("atoms")) {
        require_keys(a, {"probability", "weights"}, {"probability", "weights"},
                     "model.variant.atoms[]");
        mix.atoms.push_back({a.at("probability").get<double>(),
                             weights_from(a.at("weights"), "model.variant.atoms[]")});
      }
      variant = std::move(mix);
    } else if (type == "iid_count") {
      require_keys(v, {"type", "count", "weight"}, {"count", "weight"}, "model.variant");
      variant = IidCount{count_from_json(v.at("count")), weight_from_json(v.at("weight"))};
    } else {
      throw Error(ErrorCode::kConfig, "model.variant: unknown type '" + type + "'");
    }
    const double span = doc.value("lattice_span", 1.0);
    std::optional<std::string> exact;
    if (doc.contains("exact_m")) exact = doc.at("exact_m").get<std::string>();
    return WeightModel(std::move(variant), span, exact, doc.value("name", std::string{}));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("model: ") + e.what());
  }
}

}  // namespace smoothfix
