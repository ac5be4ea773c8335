#include "smoothfix/diagnostics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "smoothfix/error.hpp"
#include "smoothfix/martingales.hpp"
#include "smoothfix/parallel.hpp"

namespace smoothfix {

namespace {

bool in_lattice(double x, double log_r) {
  const double k = std::log(x) / log_r;
  return std::abs(k - std::round(k)) <= 1e-9;
}

// Ratio a/b of two estimates; first-order error with the covariance dropped.
Estimate ratio_of(const Estimate& a, const Estimate& b) {
  const double r = a.value / b.value;
  const double rel = a.std_error / a.value + b.std_error / b.value;
  return {r, std::abs(r) * rel, a.exact && b.exact};
}

std::vector<Estimate> evaluate(const OneMinusF& g, std::span<const double> ts) {
  std::vector<Estimate> out(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) { out[i] = g(ts[i]); });
  return out;
}

void put(std::ostream& out, double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, end - buf);
}

}  // namespace

OneMinusF one_minus_of(const SolutionSpec& sol) {
  return [sol](double t) { return sol.one_minus(t); };
}

OneMinusF one_minus_of(std::function<double(double)> f) {
  return [f = std::move(f)](double t) { return Estimate::exact_value(1.0 - f(t)); };
}

RatioCurve regvar_curve(const OneMinusF& g, double alpha, double u,
                        std::span<const double> tgrid, double lattice_span) {
  if (!(u > 0.0)) throw Error(ErrorCode::kInvalidArgument, "regvar_curve: u must be > 0");
  if (lattice_span > 1.0) {
    const double log_r = std::log(lattice_span);
    if (!in_lattice(u, log_r))
      throw Error(ErrorCode::kLatticeDiscipline,
                  "regvar_curve: u = " + std::to_string(u) + " is not a power of the span " +
                      std::to_string(lattice_span));
    for (double t : tgrid)
      if (!in_lattice(t / tgrid.front(), log_r))
        throw Error(ErrorCode::kLatticeDiscipline,
                    "regvar_curve: t grid crosses residue classes at t = " + std::to_string(t));
  }
  RatioCurve curve;
  curve.u = u;
  curve.alpha = alpha;
  const double target = std::pow(u, alpha);
  std::vector<double> shifted(tgrid.begin(), tgrid.end());
  for (double& t : shifted) t *= u;
  const auto base = evaluate(g, tgrid);
  const auto moved = u == 1.0 ? base : evaluate(g, shifted);
  for (std::size_t i = 0; i < tgrid.size(); ++i) {
    if (base[i].value < kTailFloor || moved[i].value < kTailFloor) {
      curve.dropped.push_back(tgrid[i]);
      continue;
    }
    if (u == 1.0) {
      curve.points.push_back({tgrid[i], 1.0, 1.0, 0.0});
      continue;
    }
    const Estimate r = ratio_of(moved[i], base[i]);
    curve.points.push_back({tgrid[i], r.value, target, r.std_error});
  }
  return curve;
}

DAlphaCurve d_alpha_curve(const OneMinusF& g, double alpha, std::span<const double> tgrid,
                          const std::optional<PeriodicH>& h) {
  auto d_at = [&](double t, const Estimate& e) {
    double scale = std::pow(t, alpha);
    if (h) scale *= (*h)(t);
    return Estimate{e.value / scale, e.std_error / scale, e.exact};
  };
  DAlphaCurve curve;
  const auto values = evaluate(g, tgrid);
  for (std::size_t i = 0; i < tgrid.size(); ++i) {
    if (values[i].value < kTailFloor) {
      curve.dropped.push_back(tgrid[i]);
      continue;
    }
    const Estimate d = d_at(tgrid[i], values[i]);
    curve.points.push_back({tgrid[i], d.value, 0.0, d.std_error});
  }
  if (curve.points.empty()) return curve;

  std::size_t smallest = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i].t < curve.points[smallest].t) smallest = i;
  const double t0 = curve.points[smallest].t;
  const double d0 = curve.points[smallest].value;
  for (double u : {0.5, 2.0}) {
    const Estimate e = g(u * t0);
    if (e.value < kTailFloor) continue;
    const double ratio = d_at(u * t0, e).value / d0;
    curve.slow_variation_score = std::max(curve.slow_variation_score, std::abs(ratio - 1.0));
  }
  return curve;
}

std::optional<double> nerman_ratio(const Front& front, double alpha, double beta, double c) {
  if (front.nodes.empty()) return std::nullopt;
  const double t = front.level;
  double numerator = 0.0, denominator = 0.0;
  for (const auto& v : front.nodes) {
    const double over = v.log_weight - t;
    denominator += std::exp(-alpha * over);
    if (over > c) numerator += std::exp(-beta * over);
  }
  return numerator / denominator;
}

std::vector<ApprWPoint> appr_W_trace(const WeightModel& model, const SolutionSpec& sol,
                                     std::span<const double> tlist,
                                     const ApprWOptions& options) {
  if (!sol.h().is_constant())
    throw Error(ErrorCode::kInvalidArgument, "appr_W_trace: needs a solution with constant h");
  for (std::size_t i = 1; i < tlist.size(); ++i)
    if (!(tlist[i] > tlist[i - 1]))
      throw Error(ErrorCode::kInvalidArgument, "appr_W_trace: tlist must be increasing");
  const double alpha = sol.alpha();
  const double c = sol.h().values()[0];
  const std::size_t points = tlist.size();

  // Deterministic per t, shared by every replication.
  std::vector<double> prefactor(points);
  for (std::size_t j = 0; j < points; ++j)
    prefactor[j] = std::exp(tlist[j]) * sol.one_minus(std::exp(-tlist[j] / alpha)).value;

  const std::size_t reps = options.reps;
  std::vector<double> stat(reps * points), gap(reps * points), leak(reps * points);
  std::vector<char> capped(reps * points, 0);
  parallel_for(reps, [&](std::size_t r) {
    const RandomTree tree(model, derive_seed(options.seed, r));
    const double proxy =
        subtree_mass(tree, tree.root_key(), options.proxy_depth, alpha, 0.0,
                     options.caps.max_nodes)
            .mass;
    for (std::size_t j = 0; j < points; ++j) {
      const Front line = first_exit_front(tree, tlist[j] / alpha, options.caps, alpha);
      const double s = prefactor[j] * additive_value(line, alpha);
      stat[r * points + j] = s;
      gap[r * points + j] = s - c * proxy;
      leak[r * points + j] = line.leaked_mass;
      capped[r * points + j] = line.cap_hit ? 1 : 0;
    }
  });

  std::vector<ApprWPoint> out(points);
  for (std::size_t j = 0; j < points; ++j) {
    RunningStats s, g, a;
    double leaked = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      s.add(stat[r * points + j]);
      g.add(gap[r * points + j]);
      a.add(std::abs(gap[r * points + j]));
      leaked += leak[r * points + j];
      out[j].capped_reps += capped[r * points + j] ? 1 : 0;
    }
    out[j].t = tlist[j];
    out[j].mean_statistic = s.mean();
    out[j].mean_gap = g.mean();
    out[j].mean_abs_gap = a.mean();
    out[j].abs_gap_std_error = a.stderr_of_mean();
    out[j].leaked_mass = reps ? leaked / static_cast<double>(reps) : 0.0;
  }
  return out;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points) {
  out << "t,value,target,stderr\n";
  for (const auto& p : points) {
    put(out, p.t);
    out << ',';
    put(out, p.value);
    out << ',';
    put(out, p.target);
    out << ',';
    put(out, p.std_error);
    out << '\n';
  }
}

}  // namespace smoothfix
