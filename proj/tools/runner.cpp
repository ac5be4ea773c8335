#include "runner.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "smoothfix/diagnostics.hpp"
#include "smoothfix/error.hpp"
#include "smoothfix/exponent.hpp"
#include "smoothfix/identities.hpp"
#include "smoothfix/martingales.hpp"
#include "smoothfix/parallel.hpp"
#include "smoothfix/solutions.hpp"

namespace smoothfix::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Stream indices below the master seed, one per consumer.
enum SeedStream : std::uint64_t {
  kSeedAlpha = 1,
  kSeedW = 2,
  kSeedSimulate = 3,
  kSeedIdentities = 4,
  kSeedMapping = 5,
  kSeedMinInput = 6,
  kSeedMinStep = 7,
  kSeedMinReference = 8,
  kSeedSumStep = 9,
  kSeedAppr = 10,
  kSeedNerman = 11,
  kSeedCheck = 12,
};

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

Error config_error(const std::string& what) { return Error(ErrorCode::kConfig, what); }

// Strict view of a JSON object: every read is recorded together with the
// value actually used, and unread keys are rejected by finish().
class Params {
 public:
  Params(const json& doc, std::string where) : where_(std::move(where)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw config_error(where_ + ": expected an object");
    doc_ = doc;
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    T value = fallback;
    if (doc_.contains(key)) {
      try {
        value = doc_.at(key).get<T>();
      } catch (const json::exception& e) {
        throw config_error(where_ + "." + key + ": " + e.what());
      }
    }
    effective_[key] = value;
    return value;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    used_.insert(key);
    std::size_t value = fallback;
    if (doc_.contains(key)) {
      const json& v = doc_.at(key);
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw config_error(where_ + "." + key + ": expected a non-negative integer");
      value = v.get<std::size_t>();
    }
    effective_[key] = value;
    return value;
  }

  std::optional<double> optional_number(const std::string& key) {
    used_.insert(key);
    if (!doc_.contains(key) || doc_.at(key).is_null()) {
      effective_[key] = nullptr;
      return std::nullopt;
    }
    if (!doc_.at(key).is_number()) throw config_error(where_ + "." + key + ": expected a number");
    const double v = doc_.at(key).get<double>();
    effective_[key] = v;
    return v;
  }

  json raw(const std::string& key, json fallback) {
    used_.insert(key);
    json value = doc_.contains(key) ? doc_.at(key) : std::move(fallback);
    effective_[key] = value;
    return value;
  }

  void resolve(const std::string& key, json value) { effective_[key] = std::move(value); }

  void finish() const {
    for (const auto& [key, value] : doc_.items())
      if (!used_.count(key)) throw config_error(where_ + ": unknown field '" + key + "'");
  }

  const json& effective() const { return effective_; }
  const std::string& where() const { return where_; }

 private:
  std::string where_;
  json doc_ = json::object();
  json effective_ = json::object();
  std::set<std::string> used_;
};

struct Grid {
  double lo = 1e-3;
  double hi = 10.0;
  std::size_t n = 30;
};

Grid read_grid(const json& doc, Grid fallback, const std::string& where, json* effective) {
  Params p(doc, where);
  Grid g{p.get("lo", fallback.lo), p.get("hi", fallback.hi), p.count("n", fallback.n)};
  p.finish();
  if (!(g.lo > 0.0) || !(g.hi > g.lo) || g.n < 2)
    throw config_error(where + ": need 0 < lo < hi and n >= 2");
  *effective = p.effective();
  return g;
}

struct WSource {
  std::string source = "atom";
  double value = 1.0;
  std::size_t depth = 14;
  std::size_t reps = 10000;
  double eps = 0.0;
  std::string cache_dir;
};

WSource read_w(const json& doc, const fs::path& out, json* effective) {
  Params p(doc, "params.w");
  WSource w;
  w.source = p.get<std::string>("source", "atom");
  if (w.source == "atom") {
    w.value = p.get("value", 1.0);
    if (!(w.value >= 0.0) || !std::isfinite(w.value))
      throw config_error("params.w.value: must be finite and >= 0");
  } else if (w.source == "cache") {
    w.depth = p.count("depth", w.depth);
    w.reps = p.count("reps", w.reps);
    w.eps = p.get("eps", w.eps);
    w.cache_dir = p.get<std::string>("cache_dir", (out / "cache").string());
    if (w.reps == 0) throw config_error("params.w.reps: must be > 0");
  } else {
    throw config_error("params.w.source: expected 'atom' or 'cache', got '" + w.source + "'");
  }
  p.finish();
  *effective = p.effective();
  return w;
}

struct Context {
  const WeightModel& model;
  json model_doc;
  Params& params;
  std::uint64_t master;
  const RunOptions& options;
  fs::path out;
  RunResult& result;
  json meta = json::object();

  std::uint64_t seed(SeedStream s) const { return derive_seed(master, s); }

  void add(ReportRow row) { result.rows.push_back(std::move(row)); }

  void warn(const std::string& what) {
    result.warnings.push_back(what);
    if (options.log) *options.log << "warning: " << what << '\n';
  }
};

ReportRow compare(std::string name, const Estimate& estimate, const Estimate& target,
                  double z_max) {
  ReportRow row;
  row.name = std::move(name);
  row.estimate = estimate.value;
  row.target = target.value;
  row.std_error = std::hypot(estimate.std_error, target.std_error);
  row.z = z_score(estimate, target);
  row.pass = std::abs(row.z) <= z_max;
  return row;
}

double resolve_alpha(Context& ctx) {
  const std::optional<double> given = ctx.params.optional_number("alpha");
  const double search_max = ctx.params.get("search_max", 16.0);
  if (given) {
    if (!(*given > 0.0)) throw config_error("params.alpha: must be > 0");
    return *given;
  }
  FindAlphaOptions opt;
  opt.search_max = search_max;
  opt.budget.seed = ctx.seed(kSeedAlpha);
  return find_alpha(ctx.model, opt).alpha;
}

std::string cache_stem(const Context& ctx, double alpha, const WSource& w, std::uint64_t seed) {
  const std::string key = ctx.model_doc.dump() + "|" + num(alpha) + "|" + std::to_string(w.depth) +
                          "|" + num(w.eps) + "|" + std::to_string(seed) + "|" +
                          std::to_string(w.reps);
  return "w_" + checksum_hex(key);
}

std::shared_ptr<const EmpiricalW> obtain_w(Context& ctx, double alpha, const WSource& w) {
  if (w.source == "atom") return std::make_shared<EmpiricalW>(EmpiricalW::atom(w.value));

  const std::uint64_t seed = ctx.seed(kSeedW);
  const std::string stem = cache_stem(ctx, alpha, w, seed);
  const WCachePaths paths = w_cache_paths(w.cache_dir, stem);
  json cache = {{"path", paths.csv.string()}, {"hit", false}, {"sample_seconds", 0.0}};

  if (fs::exists(paths.csv) || fs::exists(paths.sidecar)) {
    try {
      auto loaded = std::make_shared<EmpiricalW>(load_w_cache(paths));
      if (loaded->samples.size() != w.reps || loaded->meta.depth != w.depth ||
          loaded->meta.seed != seed)
        throw Error(ErrorCode::kChecksum, "W cache " + paths.csv.string() +
                                              " does not match the requested depth/reps/seed");
      cache["hit"] = true;
      cache["checksum"] = checksum_hex(w_csv_bytes(*loaded));
      ctx.result.cache_hit = true;
      ctx.meta["w_cache"] = cache;
      if (loaded->meta.cap_warning)
        ctx.warn("W cache: " + std::to_string(loaded->meta.capped_reps) + " replications hit a cap");
      return loaded;
    } catch (const Error& e) {
      if (!ctx.options.overwrite) throw;
      ctx.warn(std::string("overwriting W cache: ") + e.what());
    }
  }

  const auto start = std::chrono::steady_clock::now();
  auto sampled =
      std::make_shared<EmpiricalW>(sample_limit_W(ctx.model, alpha, w.depth, w.reps, seed, w.eps));
  cache["sample_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  cache["checksum"] = save_w_cache(*sampled, paths);
  ctx.meta["w_cache"] = cache;
  if (sampled->meta.cap_warning)
    ctx.warn("W sampling: " + std::to_string(sampled->meta.capped_reps) +
             " replications hit the node cap");
  return sampled;
}

std::vector<double> grid_points(const Grid& g) { return log_grid(g.lo, g.hi, g.n); }

// ------------------------------------------------------------------ tasks

void task_check_model(Context& ctx) {
  AssumptionOptions opt;
  opt.budget.reps = ctx.params.count("mc_reps", opt.budget.reps);
  opt.search_max = ctx.params.get("search_max", opt.search_max);
  opt.budget.seed = ctx.seed(kSeedCheck);
  ctx.params.finish();

  const AssumptionReport rep = check_assumptions(ctx.model, opt);
  auto verdict_row = [&](const std::string& name, bool holds, const std::string& evidence) {
    ReportRow row{name, holds ? 1.0 : 0.0, 1.0, 0.0, 0.0, holds, opt.budget.seed,
                  opt.budget.reps, 0};
    ctx.add(row);
    if (!evidence.empty() && ctx.options.log) *ctx.options.log << name << ": " << evidence << '\n';
  };
  verdict_row("A1", rep.a1.holds, rep.a1.evidence);
  verdict_row("A2", rep.a2.holds, rep.a2.evidence);
  verdict_row("A3", rep.a3_alpha.has_value(), rep.a3_diagnostic);
  verdict_row("A4", rep.a4a.holds || rep.a4b.holds, rep.a4a.evidence + " " + rep.a4b.evidence);
  verdict_row("A5", rep.a5.holds, rep.a5.evidence);
  verdict_row("lattice_consistent", rep.lattice_consistent, {});
  if (rep.a3_alpha)
    ctx.add({"alpha", *rep.a3_alpha, *rep.a3_alpha, opt.alpha_tol, 0.0, true, opt.budget.seed,
             opt.budget.reps, 0});
  for (const Verdict* v : {&rep.a1, &rep.a2, &rep.a4a, &rep.a4b, &rep.a5})
    if (v->inconclusive) ctx.warn("inconclusive assumption check: " + v->evidence);
}

void task_find_alpha(Context& ctx) {
  FindAlphaOptions opt;
  opt.search_max = ctx.params.get("search_max", opt.search_max);
  opt.tol = ctx.params.get("tol", opt.tol);
  opt.budget.reps = ctx.params.count("mc_reps", opt.budget.reps);
  const std::optional<double> expected = ctx.params.optional_number("expected");
  const double expected_tol = ctx.params.get("expected_tol", 1e-10);
  opt.budget.seed = ctx.seed(kSeedAlpha);
  ctx.params.finish();

  CharacteristicExponent ce = find_alpha(ctx.model, opt);
  ce.regime = classify_regime(ctx.model, ce, 0.5 * ce.alpha, opt.budget);
  ReportRow row{"alpha", ce.alpha, expected.value_or(ce.alpha), ce.solver_tolerance, 0.0, true,
                opt.budget.seed, ctx.model.has_exact_m() ? 0 : opt.budget.reps, 0};
  if (expected) {
    row.pass = std::abs(ce.alpha - *expected) <= expected_tol;
    row.z = ce.solver_tolerance > 0.0 ? (ce.alpha - *expected) / ce.solver_tolerance : 0.0;
  }
  ctx.add(row);
  ctx.add({"m_at_alpha", ce.m_at_alpha.value, 1.0, ce.m_at_alpha.std_error, 0.0, true,
           opt.budget.seed, 0, 0});
  ctx.add({"m_prime_at_alpha", ce.m_prime_at_alpha.value, 0.0, ce.m_prime_at_alpha.std_error,
           0.0, true, opt.budget.seed, 0, 0});
  ctx.meta["regime"] = to_string(ce.regime);
}

void task_simulate(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  const auto depths = ctx.params.get<std::vector<std::size_t>>("depths", {1, 4, 8, 12});
  const std::size_t reps = ctx.params.count("reps", 10000);
  const double eps = ctx.params.get("eps", 0.0);
  const double z_max = ctx.params.get("z_max", 4.0);
  const double exact_tol = ctx.params.get("exact_tol", 1e-12);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  if (reps == 0) throw config_error("params.reps: must be > 0");

  const std::uint64_t seed = ctx.seed(kSeedSimulate);
  for (std::size_t n : depths) {
    const EmpiricalW w = sample_limit_W(ctx.model, alpha, n, reps, seed, eps);
    const Estimate mean = mean_estimate(w.samples);
    ReportRow row = compare("W_mean n=" + std::to_string(n), mean, Estimate::exact_value(1.0), z_max);
    if (mean.std_error == 0.0) row.pass = std::abs(mean.value - 1.0) <= exact_tol;
    row.seed = seed;
    row.budget = reps;
    row.depth = n;
    ctx.add(row);
    if (w.meta.cap_warning)
      ctx.warn("simulate n=" + std::to_string(n) + ": " + std::to_string(w.meta.capped_reps) +
               " replications hit the node cap");
  }
}

void task_sample_w(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  json w_eff;
  WSource w = read_w(ctx.params.raw("w", {{"source", "cache"}}), ctx.out, &w_eff);
  const double z_max = ctx.params.get("z_max", 4.0);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  ctx.params.resolve("w", w_eff);
  if (w.source != "cache") throw config_error("params.w.source: sample-w needs 'cache'");

  const auto samples = obtain_w(ctx, alpha, w);
  ReportRow row = compare("W_mean", mean_estimate(samples->samples), Estimate::exact_value(1.0), z_max);
  row.seed = ctx.seed(kSeedW);
  row.budget = w.reps;
  row.depth = w.depth;
  ctx.add(row);
}

void task_verify_fixed_point(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  const json h_doc = ctx.params.raw("h", {{"type", "constant"}, {"c", 1.0}});
  json w_eff, grid_eff;
  const WSource w = read_w(ctx.params.raw("w", {{"source", "atom"}}), ctx.out, &w_eff);
  const Grid grid = read_grid(ctx.params.raw("grid", json::object()), {}, "params.grid", &grid_eff);
  ResidualOptions ropt;
  ropt.reps = ctx.params.count("reps", ropt.reps);
  ropt.points_per_decade = ctx.params.count("points_per_decade", ropt.points_per_decade);
  const double tol = ctx.params.get("tol", 0.01);
  const double z_max = ctx.params.get("z_max", 4.0);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  ctx.params.resolve("w", w_eff);
  ctx.params.resolve("grid", grid_eff);
  ropt.seed = ctx.seed(kSeedMapping);

  const SolutionSpec sol(alpha, h_from_json(h_doc, alpha), obtain_w(ctx, alpha, w));
  const std::vector<double> tgrid = grid_points(grid);
  const ResidualReport rep = residual(sol, ctx.model, tgrid, ropt);
  for (const auto& p : rep.points) {
    ReportRow row;
    row.name = "residual t=" + num(p.t);
    row.estimate = p.f.value - p.mapped.value;
    row.target = 0.0;
    row.std_error = std::hypot(p.f.std_error, p.mapped.std_error);
    row.z = p.z;
    row.pass = std::abs(row.estimate) <= tol && std::abs(p.z) <= z_max;
    row.seed = ropt.seed;
    row.budget = ropt.reps;
    row.depth = w.source == "cache" ? w.depth : 0;
    ctx.add(row);
  }
  ctx.add({"sup_residual", rep.sup_abs, 0.0, 0.0, rep.worst_abs_z,
           rep.sup_abs <= tol && rep.worst_abs_z <= z_max, ropt.seed, ropt.reps,
           w.source == "cache" ? w.depth : 0});
}

TestFunction test_function(const std::string& name) {
  if (name == "one") return TestFunction::one();
  if (name == "exp_neg") return TestFunction::exp_neg();
  if (name.rfind("min:", 0) == 0) {
    double c = 0.0;
    const char* first = name.data() + 4;
    auto [ptr, ec] = std::from_chars(first, name.data() + name.size(), c);
    if (ec == std::errc{} && ptr == name.data() + name.size()) return TestFunction::min_with(c);
  }
  throw config_error("params.functions: unknown test function '" + name +
                     "' (one, exp_neg, min:<c>)");
}

void task_verify_identities(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  const auto depths = ctx.params.get<std::vector<std::size_t>>("depths", {1, 5, 8});
  const auto names =
      ctx.params.get<std::vector<std::string>>("functions", {"one", "exp_neg", "min:3"});
  Budgets budgets;
  budgets.tree_reps = ctx.params.count("tree_reps", budgets.tree_reps);
  budgets.spine_reps = ctx.params.count("spine_reps", budgets.spine_reps);
  const bool ladder = ctx.params.get("ladder", false);
  Caps caps;
  caps.max_generation = ctx.params.count("max_generation", caps.max_generation);
  caps.max_nodes = ctx.params.count("max_nodes", caps.max_nodes);
  const double z_max = ctx.params.get("z_max", 4.0);
  const double leak_max = ctx.params.get("leak_max", 1e-3);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  budgets.seed = ctx.seed(kSeedIdentities);

  std::vector<TestFunction> fns;
  for (const auto& n : names) fns.push_back(test_function(n));
  const std::size_t budget = std::min(budgets.tree_reps, budgets.spine_reps);

  for (std::size_t n : depths)
    for (const auto& g : fns) {
      const IdentityCheck c = check_many_to_one(ctx.model, alpha, n, g, budgets);
      ReportRow row = compare("many_to_one g=" + g.name + " n=" + std::to_string(n), c.tree,
                              c.spine, z_max);
      row.seed = budgets.seed;
      row.budget = budget;
      row.depth = n;
      ctx.add(row);
    }
  if (!ladder) return;

  for (const auto& g : fns) {
    const IdentityCheck c = check_ladder_identity(ctx.model, alpha, g, budgets, caps);
    ReportRow row = compare("ladder g=" + g.name, c.tree, c.spine, z_max);
    row.seed = budgets.seed;
    row.budget = budget;
    row.depth = caps.max_generation;
    ctx.add(row);
    if (g.name == "one") {
      ReportRow mass = compare("ladder_mass", c.tree, Estimate::exact_value(1.0), z_max);
      mass.seed = budgets.seed;
      mass.budget = budgets.tree_reps;
      mass.depth = caps.max_generation;
      ctx.add(mass);
      ctx.add({"ladder_leaked", c.leaked_mass, 0.0, 0.0, 0.0, c.leaked_mass < leak_max,
               budgets.seed, budgets.tree_reps, caps.max_generation});
    }
    if (c.leaked_mass >= leak_max)
      ctx.warn("ladder line: mean leaked mass " + num(c.leaked_mass) + " at the caps");
  }
}

void task_recursion_test(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  const std::string kind = ctx.params.get<std::string>("kind", "min");
  const json h_doc = ctx.params.raw("h", {{"type", "constant"}, {"c", 1.0}});
  json w_eff;
  const WSource w = read_w(ctx.params.raw("w", {{"source", "atom"}}), ctx.out, &w_eff);
  const std::size_t samples = ctx.params.count("samples", 10000);
  const double level = ctx.params.get("level", 0.001);
  const double z_max = ctx.params.get("z_max", 4.0);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  ctx.params.resolve("w", w_eff);
  if (samples == 0) throw config_error("params.samples: must be > 0");
  const std::size_t depth = w.source == "cache" ? w.depth : 0;

  if (kind == "min") {
    const SolutionSpec sol(alpha, h_from_json(h_doc, alpha), obtain_w(ctx, alpha, w));
    const MinSamples input = sample_min_solution(sol, samples, ctx.seed(kSeedMinInput));
    const MinSamples reference = sample_min_solution(sol, samples, ctx.seed(kSeedMinReference));
    const std::vector<double> stepped = min_step(input.x, ctx.model, ctx.seed(kSeedMinStep));
    const double d = ks_two_sample(stepped, reference.x);
    const double crit = ks_critical_value(level, stepped.size(), reference.x.size());
    ctx.add({"ks_min_step", d, crit, 0.0, 0.0, d <= crit, ctx.seed(kSeedMinStep), samples, depth});
    if (input.flagged + reference.flagged > 0)
      ctx.warn(std::to_string(input.flagged + reference.flagged) +
               " min-type inversions landed on a flat stretch of h(t) t^alpha");
  } else if (kind == "sum") {
    const auto ws = obtain_w(ctx, alpha, w);
    const std::vector<double> stepped = sum_step(ws->samples, ctx.model, ctx.seed(kSeedSumStep), alpha);
    ReportRow row = compare("sum_step_mean", mean_estimate(stepped), Estimate::exact_value(1.0), z_max);
    row.seed = ctx.seed(kSeedSumStep);
    row.budget = stepped.size();
    row.depth = depth;
    ctx.add(row);
  } else {
    throw config_error("params.kind: expected 'min' or 'sum', got '" + kind + "'");
  }
}

void write_csv_file(const fs::path& path, std::span<const CurvePoint> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_curve_csv(out, points);
}

void task_diagnostics(Context& ctx) {
  const double alpha = resolve_alpha(ctx);
  const json h_doc = ctx.params.raw("h", {{"type", "constant"}, {"c", 1.0}});
  json w_eff, grid_eff;
  const WSource w = read_w(ctx.params.raw("w", {{"source", "atom"}}), ctx.out, &w_eff);
  const auto us = ctx.params.get<std::vector<double>>("u", {0.5, 0.8});
  const double t_ref = ctx.params.get("t_ref", 1e-3);
  const Grid grid =
      read_grid(ctx.params.raw("grid", json::object()), {t_ref, 1.0, 20}, "params.grid", &grid_eff);
  const double regvar_tol = ctx.params.get("regvar_tol", 0.05);
  const double slow_tol = ctx.params.get("slow_tol", 0.05);
  const auto appr_t = ctx.params.get<std::vector<double>>("appr_t", {});
  ApprWOptions aopt;
  aopt.reps = ctx.params.count("appr_reps", aopt.reps);
  aopt.proxy_depth = ctx.params.count("proxy_depth", aopt.proxy_depth);
  const double trend_z = ctx.params.get("trend_z", 4.0);
  const std::optional<double> nerman_t = ctx.params.optional_number("nerman_t");
  const auto nerman_c = ctx.params.get<std::vector<double>>("nerman_c", {0.0, 0.5, 1.0, 2.0});
  const double nerman_beta = ctx.params.get("nerman_beta", alpha);
  ctx.params.finish();
  ctx.params.resolve("alpha", alpha);
  ctx.params.resolve("w", w_eff);
  ctx.params.resolve("grid", grid_eff);
  aopt.seed = ctx.seed(kSeedAppr);

  const PeriodicH h = h_from_json(h_doc, alpha);
  const SolutionSpec sol(alpha, h, obtain_w(ctx, alpha, w));
  const OneMinusF g = one_minus_of(sol);
  const double r = ctx.model.lattice_span();
  const std::size_t depth = w.source == "cache" ? w.depth : 0;
  const std::size_t budget = sol.w().samples.size();

  // Curve grid: one residue class in the lattice case.
  std::vector<double> tgrid;
  if (r > 1.0) {
    for (double t = grid.lo; t <= grid.hi * (1.0 + 1e-12); t *= r) tgrid.push_back(t);
  } else {
    tgrid = grid_points(grid);
  }

  for (double u : us) {
    const RatioCurve ref = regvar_curve(g, alpha, u, std::span<const double>(&t_ref, 1), r);
    if (ref.points.empty()) {
      ctx.add({"regvar u=" + num(u), 0.0, std::pow(u, alpha), 0.0, 0.0, false, 0, budget, depth});
      continue;
    }
    const CurvePoint& p = ref.points.front();
    ReportRow row{"regvar u=" + num(u), p.value, p.target, p.std_error,
                  p.std_error > 0.0 ? (p.value - p.target) / p.std_error : 0.0,
                  std::abs(p.value - p.target) <= regvar_tol, 0, budget, depth};
    ctx.add(row);
    const RatioCurve curve = regvar_curve(g, alpha, u, tgrid, r);
    write_csv_file(ctx.out / ("regvar_u" + num(u) + ".csv"), curve.points);
    if (!curve.dropped.empty())
      ctx.warn("regvar u=" + num(u) + ": " + std::to_string(curve.dropped.size()) +
               " points dropped below the tail floor");
  }

  std::vector<double> dgrid = tgrid;
  dgrid.front() = std::min(dgrid.front(), t_ref);
  const DAlphaCurve d = d_alpha_curve(g, alpha, dgrid, h.is_constant() ? std::nullopt
                                                                        : std::optional(h));
  write_csv_file(ctx.out / "d_alpha.csv", d.points);
  ctx.add({"d_alpha_slow_variation", d.slow_variation_score, 0.0, 0.0, 0.0,
           d.slow_variation_score <= slow_tol, 0, budget, depth});

  if (nerman_t) {
    const RandomTree tree(ctx.model, ctx.seed(kSeedNerman));
    const Front line = first_exit_front(tree, *nerman_t, Caps{}, alpha);
    double previous = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (double c : nerman_c) {
      const std::optional<double> ratio = nerman_ratio(line, alpha, nerman_beta, c);
      if (!ratio) {
        ctx.warn("nerman_ratio: empty first-exit front");
        break;
      }
      ctx.add({"nerman c=" + num(c), *ratio, 0.0, 0.0, 0.0, true, ctx.seed(kSeedNerman), 1, 0});
      if (*ratio > previous) monotone = false;
      previous = *ratio;
    }
    ctx.add({"nerman_monotone", monotone ? 1.0 : 0.0, 1.0, 0.0, 0.0, monotone,
             ctx.seed(kSeedNerman), 1, 0});
  }

  if (!appr_t.empty()) {
    const auto trace = appr_W_trace(ctx.model, sol, appr_t, aopt);
    for (const auto& p : trace) {
      ctx.add({"appr_W gap t=" + num(p.t), p.mean_abs_gap, 0.0, p.abs_gap_std_error, 0.0, true,
               aopt.seed, aopt.reps, aopt.proxy_depth});
      if (p.capped_reps > 0)
        ctx.warn("appr_W t=" + num(p.t) + ": " + std::to_string(p.capped_reps) +
                 " replications hit a cap");
    }
    if (trace.size() >= 2) {
      const auto& first = trace.front();
      const auto& last = trace.back();
      const double se = std::hypot(first.abs_gap_std_error, last.abs_gap_std_error);
      const double drop = first.mean_abs_gap - last.mean_abs_gap;
      const bool pass = se > 0.0 ? drop > trend_z * se : drop > 0.0;
      ctx.add({"appr_W trend", last.mean_abs_gap, first.mean_abs_gap, se,
               se > 0.0 ? drop / se : 0.0, pass, aopt.seed, aopt.reps, aopt.proxy_depth});
    }
  }
}

using TaskFn = void (*)(Context&);

TaskFn task_fn(const std::string& task) {
  if (task == "check-model") return task_check_model;
  if (task == "find-alpha") return task_find_alpha;
  if (task == "simulate") return task_simulate;
  if (task == "sample-w") return task_sample_w;
  if (task == "verify-fixed-point") return task_verify_fixed_point;
  if (task == "verify-identities") return task_verify_identities;
  if (task == "recursion-test") return task_recursion_test;
  if (task == "diagnostics") return task_diagnostics;
  return nullptr;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kChecksum:
    case ErrorCode::kModelDefinition:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kLatticeDiscipline:
    case ErrorCode::kIo:
      return true;
    default:
      return false;
  }
}

fs::path default_output_dir() {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "smoothfix_out";
}

}  // namespace

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "check-model",       "find-alpha",        "simulate",       "sample-w",
      "verify-fixed-point", "verify-identities", "recursion-test", "diagnostics"};
  return names;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "name,estimate,target,stderr,z,pass,seed,budget,depth\n";
  for (const auto& r : rows) {
    out += '"' + r.name + "\"," + num(r.estimate) + ',' + num(r.target) + ',' +
           num(r.std_error) + ',' + num(r.z) + ',' + (r.pass ? "pass" : "fail") + ',' +
           std::to_string(r.seed) + ',' + std::to_string(r.budget) + ',' +
           std::to_string(r.depth) + '\n';
  }
  return out;
}

RunResult run(const std::string& task, const json& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  auto fail_config = [&](const std::string& what) {
    result.exit_code = kConfigError;
    result.error = what;
    if (options.log) *options.log << "error: " << what << '\n';
    return result;
  };

  const TaskFn fn = task_fn(task);
  if (!fn) return fail_config("unknown task '" + task + "'");

  std::optional<WeightModel> model;
  json model_doc;
  std::uint64_t master = 0;
  fs::path out;
  json params_doc;
  try {
    if (!config.is_object()) throw config_error("config: expected a JSON object");
    static const std::set<std::string> allowed = {"model", "task", "params", "master_seed",
                                                  "output_dir"};
    for (const auto& [key, value] : config.items())
      if (!allowed.count(key)) throw config_error("config: unknown field '" + key + "'");
    if (!config.contains("master_seed")) throw config_error("config: master_seed is required");
    if (!config.at("master_seed").is_number_unsigned())
      throw config_error("config.master_seed: expected an unsigned 64-bit integer");
    master = config.at("master_seed").get<std::uint64_t>();
    if (!config.contains("model")) throw config_error("config: model is required");
    if (config.contains("task") && config.at("task") != task)
      throw config_error("config.task '" + config.at("task").dump() +
                         "' does not match the requested task '" + task + "'");
    model_doc = config.at("model");
    model.emplace(model_from_json(model_doc));
    model_doc = to_json(*model);
    if (config.contains("output_dir")) {
      if (!config.at("output_dir").is_string())
        throw config_error("config.output_dir: expected a string");
      out = config.at("output_dir").get<std::string>();
    } else {
      out = default_output_dir();
    }
    params_doc = config.value("params", json::object());
  } catch (const Error& e) {
    return fail_config(e.what());
  } catch (const json::exception& e) {
    return fail_config(std::string("config: ") + e.what());
  }

  set_workers(std::max<std::size_t>(options.workers, 1));
  result.output_dir = out;
  json meta_extra = json::object();
  try {
    fs::create_directories(out);
    Params params(params_doc, "params");
    Context ctx{*model, model_doc, params, master, options, out, result};
    try {
      fn(ctx);
    } catch (const Error& e) {
      if (is_config_error(e.code())) throw;
      // The model or budget defeated the task: report it as a failed row.
      result.rows.push_back({std::string("task_error ") + to_string(e.code()), 0.0, 0.0, 0.0,
                             0.0, false, master, 0, 0});
      if (options.log) *options.log << "error: " << e.what() << '\n';
      meta_extra["task_error"] = e.what();
    }
    meta_extra.update(ctx.meta);
    meta_extra["effective_params"] = params.effective();
  } catch (const Error& e) {
    result.rows.clear();
    return fail_config(e.what());
  } catch (const json::exception& e) {
    result.rows.clear();
    return fail_config(std::string("config: ") + e.what());
  } catch (const fs::filesystem_error& e) {
    return fail_config(e.what());
  }

  bool all_pass = true;
  for (const auto& r : result.rows) all_pass = all_pass && r.pass;
  result.exit_code = all_pass ? kPass : kAssertionFailed;
  if (options.strict && !result.warnings.empty()) result.exit_code = kAssertionFailed;

  {
    std::ofstream report(out / "report.csv", std::ios::binary);
    report << report_csv(result.rows);
  }
  json meta = {{"config", config},
               {"task", task},
               {"version", kVersion},
               {"workers", options.workers},
               {"strict", options.strict},
               {"wall_seconds",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
               {"cache_hit", result.cache_hit},
               {"warnings", result.warnings},
               {"exit_code", result.exit_code}};
  meta.update(meta_extra);
  std::ofstream(out / "meta.json", std::ios::binary) << meta.dump(2) << '\n';
  return result;
}

RunResult run_file(const std::string& task, const fs::path& config_path,
                   const RunOptions& options) {
  std::ifstream in(config_path);
  if (!in) {
    RunResult r;
    r.exit_code = kConfigError;
    r.error = "cannot open config " + config_path.string();
    if (options.log) *options.log << "error: " << r.error << '\n';
    return r;
  }
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    RunResult r;
    r.exit_code = kConfigError;
    r.error = "config " + config_path.string() + ": " + e.what();
    if (options.log) *options.log << "error: " << r.error << '\n';
    return r;
  }
  return run(task, config, options);
}

}  // namespace smoothfix::cli
