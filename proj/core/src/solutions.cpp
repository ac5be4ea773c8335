#include "smoothfix/solutions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "smoothfix/error.hpp"
#include "smoothfix/parallel.hpp"

namespace smoothfix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kCheckRefinement = 16;

}  // namespace

// ---------------------------------------------------------------- PeriodicH

PeriodicH::PeriodicH(double span, std::vector<double> values, double alpha)
    : span_(span), values_(std::move(values)), alpha_(alpha) {
  log_values_.reserve(values_.size());
  for (double v : values_) log_values_.push_back(std::log(v));
}

PeriodicH PeriodicH::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c))
    throw Error(ErrorCode::kInvalidArgument, "PeriodicH: constant must be > 0");
  return PeriodicH(1.0, {c}, 1.0);
}

PeriodicH PeriodicH::lattice(double span, std::vector<double> values, double alpha) {
  if (!(span > 1.0))
    throw Error(ErrorCode::kInvalidArgument, "PeriodicH: lattice span must be > 1");
  if (values.empty())
    throw Error(ErrorCode::kInvalidArgument, "PeriodicH: lattice needs grid values");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::kInvalidArgument, "PeriodicH: values must be > 0");
  if (!(alpha > 0.0))
    throw Error(ErrorCode::kInvalidArgument, "PeriodicH: alpha must be > 0");
  PeriodicH h(span, std::move(values), alpha);

  // log(h t^alpha) at t = span^u over one full period, endpoint included.
  const std::size_t k = h.values_.size();
  const std::size_t fine = k * kCheckRefinement;
  const double log_span = std::log(span);
  auto log_g = [&](std::size_t i) {
    const double u = static_cast<double>(i) / static_cast<double>(fine);
    const std::size_t j = (i / kCheckRefinement) % k;
    const double w = static_cast<double>(i % kCheckRefinement) / kCheckRefinement;
    const double lh = i == fine ? h.log_values_[0]
                                : h.log_values_[j] +
                                      w * (h.log_values_[(j + 1) % k] - h.log_values_[j]);
    return lh + alpha * u * log_span;
  };
  double previous = log_g(0);
  for (std::size_t i = 1; i <= fine; ++i) {
    const double current = log_g(i);
    if (current < previous - 1e-12)
      throw Error(ErrorCode::kContractViolation,
                  "PeriodicH: h(t) t^alpha decreases near t = span^" +
                      std::to_string(static_cast<double>(i) / static_cast<double>(fine)));
    previous = current;
  }
  return h;
}

double PeriodicH::operator()(double t) const {
  if (span_ == 1.0) return values_[0];
  const double u = std::log(t) / std::log(span_);
  const double frac = u - std::floor(u);
  const std::size_t k = values_.size();
  const double pos = frac * static_cast<double>(k);
  const std::size_t j = std::min(static_cast<std::size_t>(pos), k - 1);
  const double w = pos - static_cast<double>(j);
  return std::exp(log_values_[j] + w * (log_values_[(j + 1) % k] - log_values_[j]));
}

PeriodicH PeriodicH::scaled(double c) const {
  std::vector<double> v = values_;
  for (double& x : v) x *= c;
  return PeriodicH(span_, std::move(v), alpha_);
}

nlohmann::json h_to_json(const PeriodicH& h) {
  if (h.is_constant()) return {{"type", "constant"}, {"c", h.values()[0]}};
  return {{"type", "lattice"}, {"span", h.span()}, {"values", h.values()}};
}

PeriodicH h_from_json(const nlohmann::json& doc, double alpha) {
  if (!doc.is_object() || !doc.contains("type"))
    throw Error(ErrorCode::kConfig, "h: expected an object with 'type'");
  const std::string type = doc.at("type").get<std::string>();
  const std::set<std::string> allowed =
      type == "constant" ? std::set<std::string>{"type", "c"}
                         : std::set<std::string>{"type", "span", "values"};
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw Error(ErrorCode::kConfig, "h: unknown field '" + key + "'");
  try {
    if (type == "constant") return PeriodicH::constant(doc.at("c").get<double>());
    if (type == "lattice")
      return PeriodicH::lattice(doc.at("span").get<double>(),
                                doc.at("values").get<std::vector<double>>(), alpha);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("h: ") + e.what());
  }
  throw Error(ErrorCode::kConfig, "h: unknown type '" + type + "'");
}

// ------------------------------------------------------------- SolutionSpec

SolutionSpec::SolutionSpec(double alpha, PeriodicH h, std::shared_ptr<const EmpiricalW> w)
    : alpha_(alpha), h_(std::move(h)), w_(std::move(w)) {
  if (!w_ || w_->samples.empty())
    throw Error(ErrorCode::kEmptySample, "SolutionSpec: empty W sample set");
  if (!(alpha_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "SolutionSpec: alpha must be > 0");
}

Estimate SolutionSpec::eval(double t) const {
  if (!(t > 0.0)) return Estimate::exact_value(1.0);
  const double x = scale_at(t);
  RunningStats s;
  for (double w : w_->samples) s.add(w == 0.0 ? 1.0 : std::exp(-w * x));
  Estimate e = s.estimate();
  e.exact = w_->samples.size() == 1;
  return e;
}

Estimate SolutionSpec::one_minus(double t) const {
  if (!(t > 0.0)) return Estimate::exact_value(0.0);
  const double x = scale_at(t);
  RunningStats s;
  for (double w : w_->samples) s.add(w == 0.0 ? 0.0 : -std::expm1(-w * x));
  Estimate e = s.estimate();
  e.exact = w_->samples.size() == 1;
  return e;
}

SolutionSpec SolutionSpec::with_scaled_w(double c) const {
  auto scaled = std::make_shared<EmpiricalW>(*w_);
  for (double& w : scaled->samples) w *= c;
  return {alpha_, h_, std::move(scaled)};
}

nlohmann::json solution_to_json(const SolutionSpec& sol, const std::string& w_path,
                                const std::string& w_checksum) {
  return {{"alpha", sol.alpha()},
          {"h", h_to_json(sol.h())},
          {"w", {{"path", w_path}, {"checksum", w_checksum}}}};
}

// ------------------------------------------------------------ GridFunction

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw Error(ErrorCode::kInvalidArgument, "log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

double GridFunction::operator()(double x) const {
  if (!(x > 0.0)) return 1.0;
  if (x <= t.front()) {
    const double v0 = value.front();
    if (v0 >= 1.0) return 1.0;
    if (v0 <= 0.0) return 0.0;
    const double d = -std::log(v0) / std::pow(t.front(), alpha);
    return std::exp(-d * std::pow(x, alpha));
  }
  if (x >= t.back()) return value.back();
  const auto it = std::upper_bound(t.begin(), t.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - t.begin());
  const std::size_t j = k - 1;
  const double lambda = (std::log(x) - std::log(t[j])) / (std::log(t[k]) - std::log(t[j]));
  const double vj = value[j], vk = value[k];
  if (vj <= 0.0 || vk <= 0.0) return vj + lambda * (vk - vj);
  const double yj = -std::log(vj), yk = -std::log(vk);
  if (yj > 0.0 && yk > 0.0)
    return std::exp(-std::exp(std::log(yj) + lambda * (std::log(yk) - std::log(yj))));
  return std::exp(-(yj + lambda * (yk - yj)));
}

GridFunction tabulate(const std::function<double(double)>& f, std::span<const double> grid,
                      double alpha) {
  GridFunction g;
  g.t.assign(grid.begin(), grid.end());
  g.value.resize(grid.size());
  g.std_error.assign(grid.size(), 0.0);
  g.alpha = alpha;
  parallel_for(grid.size(), [&](std::size_t i) { g.value[i] = f(grid[i]); });
  return g;
}

GridFunction smoothing_map(const std::function<double(double)>& f, const WeightModel& model,
                           std::span<const double> tgrid, std::size_t reps,
                           std::uint64_t seed, double alpha) {
  if (reps == 0) throw Error(ErrorCode::kInvalidArgument, "smoothing_map: reps must be > 0");
  const std::size_t points = tgrid.size();
  std::vector<double> products(reps * points);
  parallel_for(reps, [&](std::size_t r) {
    Stream rng(derive_seed(seed, r));
    const WeightSequence ts = model.sample(rng);
    for (std::size_t p = 0; p < points; ++p) {
      double prod = 1.0;
      for (double w : ts) {
        prod *= f(tgrid[p] * w);
        if (prod == 0.0) break;
      }
      products[r * points + p] = prod;
    }
  });
  GridFunction out;
  out.t.assign(tgrid.begin(), tgrid.end());
  out.alpha = alpha;
  out.value.resize(points);
  out.std_error.resize(points);
  for (std::size_t p = 0; p < points; ++p) {
    RunningStats s;
    for (std::size_t r = 0; r < reps; ++r) s.add(products[r * points + p]);
    out.value[p] = s.mean();
    out.std_error[p] = s.stderr_of_mean();
  }
  return out;
}

ResidualReport residual(const SolutionSpec& sol, const WeightModel& model,
                        std::span<const double> tgrid, const ResidualOptions& options) {
  std::function<double(double)> input;
  if (sol.w().samples.size() == 1) {
    input = [&sol](double t) { return sol(t); };
  } else {
    const double lo = tgrid.front() * options.tabulation_floor;
    const double hi = tgrid.back() * 16.0;
    const double decades = std::log10(hi / lo);
    const auto n = static_cast<std::size_t>(std::ceil(decades * options.points_per_decade)) + 1;
    auto table = std::make_shared<GridFunction>(
        tabulate([&sol](double t) { return sol(t); }, log_grid(lo, hi, n), sol.alpha()));
    input = [table](double t) { return (*table)(t); };
  }
  const GridFunction mapped =
      smoothing_map(input, model, tgrid, options.reps, options.seed, sol.alpha());

  ResidualReport report;
  report.points.resize(tgrid.size());
  for (std::size_t i = 0; i < tgrid.size(); ++i) {
    ResidualPoint& p = report.points[i];
    p.t = tgrid[i];
    p.f = sol.eval(tgrid[i]);
    p.mapped = {mapped.value[i], mapped.std_error[i], p.f.exact && mapped.std_error[i] == 0.0};
    p.z = z_score(p.f, p.mapped);
    report.sup_abs = std::max(report.sup_abs, std::abs(p.f.value - p.mapped.value));
    report.worst_abs_z = std::max(report.worst_abs_z, std::abs(p.z));
  }
  return report;
}

// ------------------------------------------------------- sample recursions

namespace {

// Leftmost x with h(x) x^alpha >= y, for y > 0.
double invert_scale(const SolutionSpec& sol, double y, bool* flat) {
  const PeriodicH& h = sol.h();
  const double alpha = sol.alpha();
  *flat = false;
  if (h.is_constant()) return std::pow(y / h.values()[0], 1.0 / alpha);

  const double r = h.span();
  const double base = h.values()[0];
  double k = std::floor(std::log(y / base) / (alpha * std::log(r)));
  double lo = std::pow(r, k), hi = lo * r;
  while (sol.scale_at(lo) > y) {
    lo /= r;
    hi /= r;
  }
  while (sol.scale_at(hi) < y) {
    lo *= r;
    hi *= r;
  }
  for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (sol.scale_at(mid) >= y)
      hi = mid;
    else
      lo = mid;
  }
  const double spread = sol.scale_at(hi * (1.0 + 1e-6)) - sol.scale_at(hi * (1.0 - 1e-6));
  *flat = spread <= 1e-12 * y;
  return hi;
}

}  // namespace

MinSamples sample_min_solution(const SolutionSpec& sol, std::size_t n, std::uint64_t seed) {
  MinSamples out;
  out.x.resize(n);
  std::vector<char> flags(n, 0);
  const auto& ws = sol.w().samples;
  parallel_for(n, [&](std::size_t i) {
    Stream rng(derive_seed(seed, i));
    const double w = ws[rng.below(ws.size())];
    const double e = rng.exponential();
    if (w == 0.0) {
      out.x[i] = kInf;
      return;
    }
    if (std::isinf(w)) {
      out.x[i] = 0.0;
      return;
    }
    bool flat = false;
    out.x[i] = invert_scale(sol, e / w, &flat);
    flags[i] = flat ? 1 : 0;
  });
  out.flagged = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
  return out;
}

std::vector<double> min_step(std::span<const double> xs, const WeightModel& model,
                             std::uint64_t seed) {
  if (xs.empty()) return {};
  std::vector<double> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    Stream rng(derive_seed(seed, i));
    const WeightSequence ts = model.sample(rng);
    double best = kInf;
    for (double t : ts) best = std::min(best, xs[rng.below(xs.size())] / t);
    out[i] = best;
  });
  return out;
}

std::vector<double> sum_step(std::span<const double> xs, const WeightModel& model,
                             std::uint64_t seed, double power) {
  if (xs.empty()) return {};
  std::vector<double> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    Stream rng(derive_seed(seed, i));
    const WeightSequence ts = model.sample(rng);
    double total = 0.0;
    for (double t : ts) total += std::pow(t, power) * xs[rng.below(xs.size())];
    out[i] = total;
  });
  return out;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw Error(ErrorCode::kEmptySample, "ks_two_sample: both samples must be non-empty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double ks_critical_value(double level, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-std::log(level / 2.0) / 2.0);
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  return c * std::sqrt((nd + md) / (nd * md));
}

}  // namespace smoothfix
