#include "gwheat/heat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "gwheat/error.hpp"
#include "gwheat/io.hpp"

namespace gwheat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorCode::invalid_input, "time must be positive");
}

std::vector<double> logs_of(std::span<const double> t) {
  std::vector<double> out(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    require_time(t[j]);
    out[j] = std::log(t[j]);
  }
  return out;
}

// Cumulative off-diagonal sums p^{(0..max_level)} at one time.
std::vector<double> offdiag_prefix_at(const SeriesData& s, std::size_t max_level, double t) {
  const double lt = std::log(t);
  std::vector<double> out(max_level + 1);
  simd::offdiag_prefix(s.view(), max_level, {&lt, 1}, out);
  return out;
}

// Heuristic remainder of the diagonal series after `used` terms: continue
// the profile geometrically with the steepest observed H decay and the
// slowest observed D decay over the last few levels.
double diag_tail(const SeriesData& s, std::size_t used, double log_t) {
  const std::size_t L = s.log_H.size() - 1;
  const std::size_t last = std::min(used, L);
  const std::size_t first = last >= 8 ? last - 8 : 0;
  if (last == first) return 0.0;
  double h_step = 0.0;
  double d_step = std::numeric_limits<double>::infinity();
  for (std::size_t n = first; n < last; ++n) {
    h_step = std::max(h_step, s.log_H[n] - s.log_H[n + 1]);
    d_step = std::min(d_step, s.log_D[n] - s.log_D[n + 1]);
  }
  if (!(d_step > 0.0)) return std::numeric_limits<double>::infinity();
  double log_H = s.log_H[last];
  double log_D = s.log_D[last];
  double tail = 0.0;
  for (int k = 0; k < 100000; ++k) {
    log_H -= h_step;
    const double term = simd::clamped_exp(-log_H - std::exp(std::min(log_t - log_D, 700.0)));
    tail += term;
    log_D -= d_step;
    if (term == 0.0 && log_t - log_D > 0.0) break;
  }
  return tail;
}

KernelValue diag_value(const SeriesData& s, const simd::DiagResult& r, double log_t) {
  KernelValue v;
  v.value = r.value;
  v.terms = r.levels_used;
  v.converged = r.converged;
  v.tail_bound = r.converged ? diag_tail(s, static_cast<std::size_t>(r.levels_used), log_t)
                             : std::numeric_limits<double>::infinity();
  return v;
}

}  // namespace

SeriesData::SeriesData(const RayProfile& p) : log_H(p.log_H), log_D(p.log_D) {
  const std::size_t L = p.levels();
  diag_log_coef.resize(L);
  offdiag_log_gap.resize(L + 1);
  for (std::size_t n = 0; n < L; ++n) {
    // log(1/H_{n+1} - 1/H_n) = -log H_{n+1} + log(1 - H_{n+1}/H_n)
    const double drop = log_H[n + 1] - log_H[n];
    diag_log_coef[n] = drop < 0.0 ? -log_H[n + 1] + std::log(-std::expm1(drop)) : kNegInf;
  }
  offdiag_log_gap[0] = 0.0;
  for (std::size_t n = 1; n <= L; ++n) {
    const double drop = log_D[n] - log_D[n - 1];
    offdiag_log_gap[n] = drop < 0.0 ? std::log(-std::expm1(drop)) : kNegInf;
  }
}

simd::SeriesLevels SeriesData::view() const noexcept {
  return {log_H, log_D, diag_log_coef, offdiag_log_gap};
}

KernelValue p_offdiag(const RayProfile& profile, std::size_t N, double t) {
  const auto v = p_offdiag_curve(profile, N, {&t, 1});
  return v[0];
}

std::vector<KernelValue> p_offdiag_curve(const RayProfile& profile, std::size_t N,
                                         std::span<const double> t) {
  if (N > profile.levels())
    fail(ErrorCode::under_resolved, "meet level " + std::to_string(N) + " beyond profile depth " +
                                        std::to_string(profile.levels()));
  const auto lt = logs_of(t);
  const SeriesData s(profile);
  std::vector<double> prefix(t.size() * (N + 1));
  simd::offdiag_prefix(s.view(), N, lt, prefix);
  std::vector<KernelValue> out(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    out[j].value = prefix[j * (N + 1) + N];
    out[j].terms = static_cast<std::int32_t>(N + 1);
  }
  return out;
}

std::size_t diag_levels_needed(const RayProfile& profile, double t, const DiagOptions& options) {
  require_time(t);
  const std::size_t L = profile.levels();
  const double target = std::log(t) - std::log(options.min_time_ratio);
  for (std::size_t n = 0; n <= L; ++n)
    if (profile.log_D[n] < target) return n + static_cast<std::size_t>(options.quiet_terms) + 1;
  if (L == 0) return static_cast<std::size_t>(options.quiet_terms) + 64;
  const std::size_t back = std::min<std::size_t>(L, 10);
  const double slope = (profile.log_D[L - back] - profile.log_D[L]) / static_cast<double>(back);
  if (!(slope > 0.0)) return 2 * L + 64;
  const double more = std::ceil((profile.log_D[L] - target) / slope);
  return L + static_cast<std::size_t>(more) + static_cast<std::size_t>(options.quiet_terms) + 1;
}

KernelValue p_diag(const RayProfile& profile, double t, const DiagOptions& options) {
  const auto v = p_diag_curve(profile, {&t, 1}, options);
  if (!v[0].converged)
    fail(ErrorCode::under_resolved,
         "diagonal series at t=" + format_double(t) + " needs about " +
             std::to_string(diag_levels_needed(profile, t, options)) + " levels, profile has " +
             std::to_string(profile.levels()));
  return v[0];
}

std::vector<KernelValue> p_diag_curve(const RayProfile& profile, std::span<const double> t,
                                      const DiagOptions& options) {
  const auto lt = logs_of(t);
  const SeriesData s(profile);
  std::vector<simd::DiagResult> res(t.size());
  simd::diag_series(s.view(), lt, options, res);
  std::vector<KernelValue> out(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) out[j] = diag_value(s, res[j], lt[j]);
  return out;
}

ShellDistribution shell_distribution(const RayProfile& profile, double t, std::size_t M,
                                     double tolerance) {
  require_time(t);
  if (M + 1 > profile.levels())
    fail(ErrorCode::invalid_input, "shell cap M must be below the profile depth");
  const SeriesData s(profile);
  const auto prefix = offdiag_prefix_at(s, M, t);
  ShellDistribution out;
  out.t = t;
  out.q.resize(M + 1);
  double total = 0.0;
  for (std::size_t n = 0; n <= M; ++n) {
    const double shell = -std::exp(profile.log_H[n]) * std::expm1(profile.log_H[n + 1] - profile.log_H[n]);
    out.q[n] = shell * prefix[n];
    total += out.q[n];
  }
  out.residual = 1.0 - total;
  out.analytic_residual = std::exp(profile.log_H[M + 1]) * prefix[M] +
                          simd::clamped_exp(-std::exp(std::min(std::log(t) - profile.log_D[M], 700.0)));
  out.under_resolved = out.analytic_residual > tolerance;
  out.suggested_levels = out.under_resolved ? diag_levels_needed(profile, t) : M + 1;
  return out;
}

const char* to_string(Metric m) noexcept { return m == Metric::d ? "d" : "D"; }

MomentValue moments(const RayProfile& profile, double t, double gamma, Metric metric,
                    double rel_tol) {
  if (!(gamma > 0.0)) fail(ErrorCode::invalid_input, "gamma must be positive");
  if (profile.levels() < 1) fail(ErrorCode::under_resolved, "profile needs at least one level");
  const std::size_t M = profile.levels() - 1;
  const auto sd = shell_distribution(profile, t, M, 1.0);
  auto log_scale = [&](std::size_t n) {
    return metric == Metric::d ? -static_cast<double>(n) : profile.log_D[n];
  };
  MomentValue out;
  out.shells = M + 1;
  for (std::size_t n = 0; n <= M; ++n) out.value += sd.q[n] * std::exp(gamma * log_scale(n));
  out.error_bound = std::max(sd.analytic_residual, 0.0) * std::exp(gamma * log_scale(M));
  if (out.error_bound > rel_tol * out.value)
    fail(ErrorCode::under_resolved,
         "moment at t=" + format_double(t) + " unresolved: residual bracket " +
             format_double(out.error_bound) + " vs value " + format_double(out.value) +
             "; about " + std::to_string(diag_levels_needed(profile, t)) + " levels needed");
  return out;
}

double q_t_reference(const RayProfile& profile, std::size_t N, double t) {
  require_time(t);
  if (N > profile.levels()) fail(ErrorCode::under_resolved, "meet level beyond profile depth");
  if (std::log(t) <= profile.log_D[N])
    return std::exp(std::log(t) - profile.log_D[N] - profile.log_H[N]);
  return std::exp(-profile.log_H[ball_to_cylinder(profile, t)]);
}

BoundCheck check_kernel_bounds(const RayProfile& profile, std::span<const double> t) {
  BoundCheck out;
  out.worst_lower_ratio = std::numeric_limits<double>::infinity();
  const std::size_t L = profile.levels();
  const auto diag = p_diag_curve(profile, t);
  const auto lt = logs_of(t);
  const SeriesData s(profile);
  std::vector<double> prefix(t.size() * (L + 1));
  simd::offdiag_prefix(s.view(), L, lt, prefix);
  constexpr double slack = 1e-12;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (diag[j].converged && lt[j] > profile.log_D[L]) {
      const std::size_t n = ball_to_cylinder_log(profile, lt[j]);
      const double ratio = diag[j].value * std::exp(1.0 + profile.log_H[n]);
      ++out.lower_checked;
      if (ratio < 1.0 - slack) ++out.lower_violations;
      out.worst_lower_ratio = std::min(out.worst_lower_ratio, ratio);
    }
    for (std::size_t N = 0; N <= L; ++N) {
      if (lt[j] > profile.log_D[N]) continue;
      const double bound = std::exp(lt[j] - profile.log_D[N] - profile.log_H[N]);
      const double ratio = prefix[j * (L + 1) + N] / bound;
      ++out.upper_checked;
      if (ratio > 1.0 + slack) ++out.upper_violations;
      out.worst_upper_ratio = std::max(out.worst_upper_ratio, ratio);
    }
  }
  return out;
}

double own_cell_integral(const RayProfile& profile, std::size_t L, double t) {
  require_time(t);
  if (L < 1 || L > profile.levels())
    fail(ErrorCode::invalid_input, "own cell depth must be in 1..profile depth");
  const SeriesData s(profile);
  const auto prefix = offdiag_prefix_at(s, L - 1, t);
  return std::exp(profile.log_H[L]) * prefix[L - 1] +
         simd::clamped_exp(-std::exp(std::min(std::log(t) - profile.log_D[L - 1], 700.0)));
}

MassCheck verify_mass(ElectricNetwork& net, const RayProfile& w, double t, std::size_t L) {
  require_time(t);
  if (L < 1 || w.levels() < L)
    fail(ErrorCode::invalid_input, "profile must reach the cell depth");
  const SeriesData s(w);
  const auto prefix = offdiag_prefix_at(s, L - 1, t);
  const VertexId home = w.vertex(L);
  MassCheck out;
  out.own_cell_share = own_cell_integral(w, L, t);
  if (out.own_cell_share > 0.5)
    fail(ErrorCode::under_resolved, "t=" + format_double(t) + " too small for depth " +
                                        std::to_string(L) + ": own cell holds " +
                                        format_double(out.own_cell_share) + " of the mass");
  double total = out.own_cell_share;
  for (const auto& c : cells_at_depth(net, L)) {
    ++out.cells;
    if (c.vertex == home) continue;
    total += std::exp(c.log_H) * prefix[meet_level(c.vertex, home)];
  }
  out.defect = std::abs(total - 1.0);
  return out;
}

CKCheck verify_ck(ElectricNetwork& net, const RayProfile& w, const RayProfile& eta, double t,
                  double s, std::size_t L) {
  require_time(t);
  require_time(s);
  if (L < 1 || w.levels() < L || eta.levels() < L)
    fail(ErrorCode::invalid_input, "profiles must reach the cell depth");
  const VertexId wL = w.vertex(L), eL = eta.vertex(L);
  if (wL == eL) fail(ErrorCode::invalid_input, "rays must separate above the cell depth");
  const std::size_t meet = meet_level(wL, eL);

  const SeriesData sw(w), se(eta);
  const auto pw_t = offdiag_prefix_at(sw, L - 1, t);
  const auto pe_s = offdiag_prefix_at(se, L - 1, s);
  const double own_w = own_cell_integral(w, L, t);
  const double own_e = own_cell_integral(eta, L, s);

  CKCheck out;
  out.own_cell_share = std::max(own_w, own_e);
  if (out.own_cell_share > 0.5)
    fail(ErrorCode::under_resolved, "times too small for depth " + std::to_string(L));
  double lhs = 0.0;
  for (const auto& c : cells_at_depth(net, L)) {
    ++out.cells;
    if (c.vertex == wL) {
      lhs += own_w * pe_s[meet];
    } else if (c.vertex == eL) {
      lhs += pw_t[meet] * own_e;
    } else {
      lhs += std::exp(c.log_H) * pw_t[meet_level(c.vertex, wL)] * pe_s[meet_level(c.vertex, eL)];
    }
  }
  out.lhs = lhs;
  out.rhs = p_offdiag(w, meet, t + s).value;
  out.rel_error = std::abs(lhs - out.rhs) / out.rhs;
  return out;
}

std::vector<TrajectoryPoint> sample_trajectory(ElectricNetwork& net, RayProfile start,
                                               std::span<const double> times, Rng& rng,
                                               const TrajectoryOptions& options) {
  for (std::size_t j = 0; j < times.size(); ++j) {
    require_time(times[j]);
    if (j > 0 && !(times[j] > times[j - 1]))
      fail(ErrorCode::invalid_input, "time grid must be strictly increasing");
  }
  if (options.report_depth < 1) fail(ErrorCode::invalid_input, "report depth must be >= 1");
  RayProfile current = std::move(start);
  if (current.levels() < options.report_depth)
    extend_ray(net, current, options.report_depth - current.levels(), rng);

  std::vector<TrajectoryPoint> path;
  double prev = 0.0;
  for (double time : times) {
    const double dt = time - prev;
    prev = time;
    const double u = uniform01(rng);
    std::size_t shell = 0;
    for (;;) {
      const auto sd = shell_distribution(current, dt, current.levels() - 1, 1.0);
      double acc = 0.0;
      bool found = false;
      for (std::size_t n = 0; n < sd.q.size(); ++n) {
        acc += sd.q[n];
        if (u < acc) {
          shell = n;
          found = true;
          break;
        }
      }
      if (found) break;
      if (current.levels() + options.extend_step > options.max_levels)
        fail(ErrorCode::under_resolved,
             "jump shell beyond " + std::to_string(options.max_levels) + " levels at dt=" +
                 format_double(dt));
      extend_ray(net, current, options.extend_step, rng);
    }
    current = resample_below(net, current, shell, std::max(options.report_depth, shell + 1), rng);
    path.push_back({time, current.vertex(options.report_depth), shell});
  }
  return path;
}

void write_trajectory_jsonl(std::ostream& os, std::span<const TrajectoryPoint> path,
                            const std::string& config_hash) {
  nlohmann::ordered_json meta;
  meta["config_hash"] = config_hash;
  os << meta.dump() << '\n';
  for (const auto& p : path) {
    nlohmann::ordered_json j;
    j["time"] = p.time;
    j["ray_prefix"] = std::vector<std::uint32_t>(p.ray_prefix.path().begin(), p.ray_prefix.path().end());
    j["shell_drawn"] = p.shell_drawn;
    os << j.dump() << '\n';
  }
}

void write_kernel_csv(std::ostream& os, std::span<const double> t,
                      std::span<const KernelValue> values, const std::string& config_hash) {
  os << "# config_hash=" << config_hash << "\n"
     << "t,value,tail_bound\n";
  for (std::size_t j = 0; j < t.size(); ++j)
    os << format_double(t[j]) << ',' << format_double(values[j].value) << ','
       << format_double(values[j].tail_bound) << '\n';
}

}  // namespace gwheat
