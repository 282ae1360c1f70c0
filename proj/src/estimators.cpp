#include "gwheat/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gwheat/error.hpp"
#include "gwheat/parallel.hpp"

namespace gwheat {

namespace {

constexpr std::uint64_t kPoolSalt = 0x706f6f6c5f616c70ULL;

ExponentFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorCode::invalid_input, "regression needs at least 3 points, got " +
                                                std::to_string(n));
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) fail(ErrorCode::invalid_input, "regression abscissae are all equal");
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.r2 = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
  f.points = n;
  return f;
}

void check_sizes(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::invalid_input, "x and y differ in length");
}

LazyTree replicate_tree(const OffspringDistribution& dist, std::uint64_t seed, std::size_t i) {
  return LazyTree(dist, derive_seed(seed, 2 * i));
}

void require_subcritical(const OffspringDistribution& dist, double lambda) {
  if (!(lambda > 0.0) || !(lambda < dist.mean()))
    fail(ErrorCode::not_transient, "lambda must lie in (0, m) with m = " +
                                       std::to_string(dist.mean()));
}

}  // namespace

ExponentFit fit_loglog(std::span<const double> x, std::span<const double> y, double lo,
                       double hi) {
  check_sizes(x, y);
  std::vector<double> lx, ly;
  double wlo = 0.0, whi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lo && x[i] <= hi)) continue;
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      fail(ErrorCode::invalid_input, "nonpositive value in log-log window at x = " +
                                         std::to_string(x[i]));
    if (lx.empty() || x[i] < wlo) wlo = x[i];
    if (lx.empty() || x[i] > whi) whi = x[i];
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  auto f = least_squares(lx, ly);
  f.window_lo = wlo;
  f.window_hi = whi;
  return f;
}

ExponentFit fit_loglinear(std::span<const double> x, std::span<const double> y, double lo,
                          double hi) {
  check_sizes(x, y);
  std::vector<double> lx, ly;
  double wlo = 0.0, whi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lo && x[i] <= hi)) continue;
    if (!(y[i] > 0.0))
      fail(ErrorCode::invalid_input, "nonpositive value in log-linear window at x = " +
                                         std::to_string(x[i]));
    if (lx.empty() || x[i] < wlo) wlo = x[i];
    if (lx.empty() || x[i] > whi) whi = x[i];
    lx.push_back(x[i]);
    ly.push_back(std::log(y[i]));
  }
  auto f = least_squares(lx, ly);
  f.window_lo = wlo;
  f.window_hi = whi;
  return f;
}

ExponentFit fit_linear(std::span<const double> x, std::span<const double> y) {
  check_sizes(x, y);
  auto f = least_squares({x.begin(), x.end()}, {y.begin(), y.end()});
  if (!x.empty()) {
    const auto [a, b] = std::minmax_element(x.begin(), x.end());
    f.window_lo = *a;
    f.window_hi = *b;
  }
  return f;
}

ExponentEstimate summarize(std::vector<double> values) {
  ExponentEstimate e;
  e.replicates = values.size();
  if (values.empty()) fail(ErrorCode::invalid_input, "no replicates");
  const double n = static_cast<double>(values.size());
  // Shifted sum, so equal replicates give their common value exactly.
  double shift = 0.0;
  for (double v : values) shift += v - values[0];
  e.value = values[0] + shift / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  if (!std::isfinite(e.value)) fail(ErrorCode::numerical, "non-finite estimate");
  e.per_replicate = std::move(values);
  return e;
}

ExponentTargets ExponentTargets::make(double beta, double lambda) {
  if (!(lambda > 0.0)) fail(ErrorCode::invalid_input, "lambda must be positive");
  ExponentTargets t{beta, std::log(lambda)};
  if (!(beta - t.log_lambda > 0.0))
    fail(ErrorCode::invalid_input, "beta - log lambda must be positive (beta = " +
                                       std::to_string(beta) + ")");
  return t;
}

double ExponentTargets::walk_exponent() const noexcept {
  return std::max(beta - log_lambda, 1.0);
}

double ExponentTargets::displacement_d(double gamma) const noexcept {
  return std::min(gamma / (beta - log_lambda), 1.0);
}

double ExponentTargets::displacement_D(double gamma) const noexcept {
  return std::min(gamma, 1.0);
}

ExponentEstimate estimate_beta_ray(const OffspringDistribution& dist, double lambda,
                                   std::size_t n_levels, std::size_t replicates,
                                   std::uint64_t seed, const ReplicateOptions& options) {
  require_subcritical(dist, lambda);
  if (n_levels == 0 || replicates == 0)
    fail(ErrorCode::invalid_input, "levels and replicates must be positive");
  std::vector<double> values(replicates);
  parallel_for(replicates, options.workers, [&](std::size_t i) {
    LazyTree tree = replicate_tree(dist, seed, i);
    ElectricNetwork net(tree, lambda, options.policy);
    auto rng = make_rng(seed, 2 * i + 1);
    const auto profile = sample_ray(net, n_levels, rng);
    values[i] = -profile.log_H[n_levels] / static_cast<double>(n_levels);
  });
  return summarize(std::move(values));
}

ExponentEstimate estimate_resistance_exponent(const OffspringDistribution& dist, double lambda,
                                              std::size_t n_levels, std::size_t replicates,
                                              std::uint64_t seed,
                                              const ReplicateOptions& options) {
  require_subcritical(dist, lambda);
  if (n_levels < 4 || replicates == 0)
    fail(ErrorCode::invalid_input, "need at least 4 levels and one replicate");
  const std::size_t first = n_levels / 2;
  std::vector<double> values(replicates), r2(replicates);
  parallel_for(replicates, options.workers, [&](std::size_t i) {
    LazyTree tree = replicate_tree(dist, seed, i);
    ElectricNetwork net(tree, lambda, options.policy);
    auto rng = make_rng(seed, 2 * i + 1);
    const auto profile = sample_ray(net, n_levels, rng);
    std::vector<double> n, y;
    for (std::size_t k = first; k <= n_levels; ++k) {
      n.push_back(static_cast<double>(k));
      y.push_back(profile.log_R[k]);
    }
    const auto f = fit_linear(n, y);
    values[i] = f.slope;
    r2[i] = f.r2;
  });
  auto e = summarize(std::move(values));
  e.window = std::pair<double, double>(static_cast<double>(first), static_cast<double>(n_levels));
  e.r2 = std::accumulate(r2.begin(), r2.end(), 0.0) / static_cast<double>(replicates);
  return e;
}

ThetaEstimate estimate_theta(ElectricNetwork& net, std::span<const double> pool) {
  if (pool.empty()) fail(ErrorCode::invalid_input, "empty escape-probability pool");
  const double lambda = net.lambda();
  const double ec = 1.0 / net.resistance(net.tree().root()).mid();
  ThetaEstimate out;
  double sum = 0.0;
  for (double a : pool) {
    const double den = lambda - 1.0 + a + ec;
    if (!(den > 0.0)) {
      out.flagged = true;
      continue;
    }
    sum += a * ec / den;
  }
  out.theta = sum / static_cast<double>(pool.size());
  return out;
}

ThetaEstimate estimate_theta(const OffspringDistribution& dist, ElectricNetwork& net,
                             std::size_t n_inner, std::uint64_t seed,
                             const ReplicateOptions& options) {
  const auto pool = alpha_pool(dist, net.lambda(), n_inner, seed, options);
  return estimate_theta(net, pool);
}

std::vector<double> alpha_pool(const OffspringDistribution& dist, double lambda, std::size_t count,
                               std::uint64_t seed, const ReplicateOptions& options) {
  require_subcritical(dist, lambda);
  const std::uint64_t pool_seed = derive_seed(seed, kPoolSalt);
  std::vector<double> alpha(count);
  parallel_for(count, options.workers, [&](std::size_t j) {
    LazyTree tree(dist, derive_seed(pool_seed, j));
    ElectricNetwork net(tree, lambda, options.policy);
    alpha[j] = escape_probability(net.resistance(tree.root()).mid(), lambda);
  });
  return alpha;
}

StationaryEstimate beta_stationary(const OffspringDistribution& dist, double lambda,
                                   std::size_t n_outer, std::size_t n_inner, std::uint64_t seed,
                                   const ReplicateOptions& options) {
  require_subcritical(dist, lambda);
  if (n_outer < 2 || n_inner == 0)
    fail(ErrorCode::invalid_input, "need at least 2 outer trees and one inner tree");
  const auto pool = alpha_pool(dist, lambda, n_inner, seed, options);
  StationaryEstimate s;
  s.theta.resize(n_outer);
  s.entropy.resize(n_outer);
  std::vector<char> flagged(n_outer, 0);
  parallel_for(n_outer, options.workers, [&](std::size_t i) {
    LazyTree tree = replicate_tree(dist, seed, i);
    ElectricNetwork net(tree, lambda, options.policy);
    net.prefetch(tree.root(), 1);
    const auto th = estimate_theta(net, pool);
    const auto split = net.harmonic_flow(tree.root());
    double h = 0.0;
    for (double ls : split.log_shares) h -= std::exp(ls) * ls;
    s.theta[i] = th.theta;
    s.entropy[i] = h;
    flagged[i] = th.flagged;
  });
  s.flagged = static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), 1));

  const double n = static_cast<double>(n_outer);
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n_outer; ++i) {
    sx += s.theta[i];
    sy += s.theta[i] * (s.entropy[i] - s.entropy[0]);
  }
  if (!(sx > 0.0)) fail(ErrorCode::numerical, "stationary weights sum to zero");
  s.h = sx / n;
  auto& b = s.beta;
  b.value = s.entropy[0] + sy / sx;
  b.replicates = n_outer;
  b.per_replicate = s.entropy;
  double ss = 0.0;
  for (std::size_t i = 0; i < n_outer; ++i) {
    const double z = s.theta[i] * (s.entropy[i] - b.value);
    ss += z * z;
  }
  b.std_error = std::sqrt(ss / (n - 1.0) / n) / s.h;
  return s;
}

namespace {

bool beyond(double t, double limit) { return std::isfinite(limit) && t > limit; }

double crossover_limit(const RayProfile& profile, std::size_t level, double factor = 1.0) {
  if (level > profile.levels()) return std::numeric_limits<double>::infinity();
  return factor * profile.D(level);
}

void finish(CurveFit& c) {
  std::vector<double> x, y;
  for (const auto& p : c.points)
    if (p.used) {
      x.push_back(p.t);
      y.push_back(p.value);
    }
  if (x.size() < 3)
    fail(ErrorCode::under_resolved,
         "only " + std::to_string(x.size()) + " grid points survive trimming (" +
             std::to_string(c.trimmed_small) + " small-t, " + std::to_string(c.trimmed_large) +
             " large-t dropped); deepen the profile or move the grid");
  c.fit = fit_loglog(x, y);
}

DisplacementFit scan_moment(const RayProfile& profile, double gamma, Metric metric,
                            std::span<const double> t_grid, const ExponentTargets& targets,
                            const ScanOptions& options) {
  DisplacementFit out;
  out.gamma = gamma;
  out.metric = metric;
  auto& c = out.curve;
  c.target = metric == Metric::d ? targets.displacement_d(gamma) : targets.displacement_D(gamma);
  const double limit = crossover_limit(profile, options.crossover_level);
  for (double t : t_grid) {
    ScanPoint p{t, 0.0, false};
    if (beyond(t, limit)) {
      ++c.trimmed_large;
    } else {
      try {
        p.value = moments(profile, t, gamma, metric, options.moment_rel_tol).value;
        p.used = p.value > 0.0;
        if (!p.used) ++c.trimmed_small;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::under_resolved) throw;
        ++c.trimmed_small;
      }
    }
    c.points.push_back(p);
  }
  finish(c);
  return out;
}

}  // namespace

HeatScan heat_exponent_scan(const RayProfile& profile, std::span<const double> t_grid,
                            const ExponentTargets& targets, const ScanOptions& options) {
  if (options.meet_level > profile.levels())
    fail(ErrorCode::under_resolved, "meet level beyond the profile");
  HeatScan s;
  s.meet_level = options.meet_level;

  s.diagonal.target = -targets.kappa();
  const double diag_limit = crossover_limit(profile, options.crossover_level);
  const auto diag = p_diag_curve(profile, t_grid);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    ScanPoint p{t_grid[i], diag[i].value, false};
    if (beyond(t_grid[i], diag_limit))
      ++s.diagonal.trimmed_large;
    else if (!diag[i].converged || !(diag[i].value > 0.0))
      ++s.diagonal.trimmed_small;
    else
      p.used = true;
    s.diagonal.points.push_back(p);
  }
  finish(s.diagonal);

  // p^(N) is linear in t well below D_N.
  s.offdiagonal.target = 1.0;
  const double off_limit = crossover_limit(profile, options.meet_level, 1e-2);
  const auto off = p_offdiag_curve(profile, options.meet_level, t_grid);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    ScanPoint p{t_grid[i], off[i].value, false};
    if (beyond(t_grid[i], off_limit))
      ++s.offdiagonal.trimmed_large;
    else if (!(off[i].value > 0.0))
      ++s.offdiagonal.trimmed_small;
    else
      p.used = true;
    s.offdiagonal.points.push_back(p);
  }
  finish(s.offdiagonal);
  return s;
}

std::vector<DisplacementFit> displacement_scan(const RayProfile& profile,
                                               std::span<const double> gammas,
                                               std::span<const double> t_grid,
                                               const ExponentTargets& targets,
                                               const ScanOptions& options) {
  std::vector<DisplacementFit> out;
  for (double g : gammas)
    for (Metric m : {Metric::d, Metric::D})
      out.push_back(scan_moment(profile, g, m, t_grid, targets, options));
  return out;
}

MetricBridge displacement_metric_bridge(const RayProfile& profile, double gamma,
                                        std::span<const double> t_grid,
                                        const ExponentTargets& targets,
                                        const ScanOptions& options) {
  MetricBridge b;
  b.d = scan_moment(profile, gamma, Metric::d, t_grid, targets, options);
  b.D = scan_moment(profile, gamma, Metric::D, t_grid, targets, options);
  for (std::size_t n = 1; n <= profile.levels(); ++n)
    b.ratio_trace.push_back(profile.log_D[n] / -static_cast<double>(n));
  b.ratio_target = targets.beta - targets.log_lambda;
  return b;
}

const char* to_string(TailModel m) noexcept {
  switch (m) {
    case TailModel::bounded: return "bounded";
    case TailModel::log_linear: return "log-linear";
    case TailModel::log_log: return "log-log";
  }
  return "?";
}

TailScan tail_scan(const OffspringDistribution& dist, double lambda, std::size_t replicates,
                   std::uint64_t seed, const TailOptions& options) {
  require_subcritical(dist, lambda);
  if (replicates < 3) fail(ErrorCode::invalid_input, "tail scan needs at least 3 replicates");
  TailScan s;
  s.samples.resize(replicates);
  std::vector<char> unresolved(replicates, 0);
  parallel_for(replicates, options.replicate.workers, [&](std::size_t i) {
    LazyTree tree = replicate_tree(dist, seed, i);
    if (options.truncation_depth > 0) {
      s.samples[i] = truncated_resistance(tree, VertexId{}, lambda, options.truncation_depth);
      return;
    }
    ElectricNetwork net(tree, lambda, options.replicate.policy);
    const auto r = net.resistance(tree.root());
    s.samples[i] = r.mid();
    unresolved[i] = !r.resolved;
  });
  s.unresolved = static_cast<std::size_t>(std::count(unresolved.begin(), unresolved.end(), 1));
  std::sort(s.samples.begin(), s.samples.end());
  const std::size_t n = replicates;
  s.survival.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s.survival[i] = static_cast<double>(n - 1 - i) / static_cast<double>(n);
  s.max_sample = s.samples.back();
  if (options.truncation_depth > 0)
    s.notes.push_back("samples are grounded resistances truncated at depth " +
                      std::to_string(options.truncation_depth));
  if (s.unresolved > 0)
    s.notes.push_back(std::to_string(s.unresolved) +
                      " samples stopped before the gap target; values are interval midpoints");

  if (lambda < 1.0) {
    s.model = TailModel::bounded;
    s.bound = 1.0 / (1.0 - lambda);
    return s;
  }
  s.model = lambda == 1.0 ? TailModel::log_linear : TailModel::log_log;
  if (s.model == TailModel::log_log && !(dist.probability(1) > 0.0))
    s.notes.push_back("p_1 = 0: no polynomial tail is predicted");

  const auto start = static_cast<std::size_t>(std::floor(options.window_quantile * n));
  s.exceedances = n - std::min(start, n);
  s.heavy_tail_warning = s.exceedances < options.min_exceedances;
  if (s.heavy_tail_warning)
    s.notes.push_back("fit window has only " + std::to_string(s.exceedances) + " exceedances");
  // Distinct abscissae with survival mass left, one point per tie block.
  std::vector<double> x, y;
  for (std::size_t i = start; i + 1 < n; ++i) {
    if (s.samples[i + 1] == s.samples[i]) continue;
    if (s.model == TailModel::log_log && !(s.samples[i] > 0.0)) continue;
    x.push_back(s.samples[i]);
    y.push_back(s.survival[i]);
  }
  if (x.size() < 3) {
    s.notes.push_back("too few distinct tail points to fit");
    return s;
  }
  s.fit = s.model == TailModel::log_linear ? fit_loglinear(x, y) : fit_loglog(x, y);
  s.notes.push_back("tail fit is qualitative; decay constants are not estimated");
  return s;
}

std::string estimate_json(const std::string& estimator, const ExponentEstimate& e,
                          const std::optional<ExponentTargets>& targets, std::uint64_t seed,
                          const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["estimator"] = estimator;
  j["value"] = e.value;
  j["stderr"] = e.std_error;
  j["replicates"] = e.replicates;
  if (e.window)
    j["window"] = {e.window->first, e.window->second};
  else
    j["window"] = nullptr;
  if (e.r2)
    j["r2"] = *e.r2;
  else
    j["r2"] = nullptr;
  if (targets) {
    j["targets"] = {{"beta", targets->beta},
                    {"log_lambda", targets->log_lambda},
                    {"kappa", targets->kappa()},
                    {"walk_exponent", targets->walk_exponent()}};
  } else {
    j["targets"] = nullptr;
  }
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  return j.dump();
}

}  // namespace gwheat
