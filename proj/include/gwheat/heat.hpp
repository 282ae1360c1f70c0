#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gwheat/boundary.hpp"
#include "gwheat/simd/kernels.hpp"

namespace gwheat {

// Owned per-level coefficient arrays for the kernel series along one ray.
struct SeriesData {
  std::vector<double> log_H, log_D, diag_log_coef, offdiag_log_gap;

  explicit SeriesData(const RayProfile& profile);
  simd::SeriesLevels view() const noexcept;
};

struct KernelValue {
  double value = 0.0;
  double tail_bound = 0.0;  // estimated size of the omitted series tail
  std::int32_t terms = 0;
  bool converged = true;    // false: the profile ran out before the stop rule held
};

using DiagOptions = simd::DiagOptions;

// p_t(w, eta) for any eta meeting w at level N (finite sum, no tail).
KernelValue p_offdiag(const RayProfile& profile, std::size_t N, double t);
std::vector<KernelValue> p_offdiag_curve(const RayProfile& profile, std::size_t N,
                                         std::span<const double> t);

// p_t(w, w). The series stops once terms stay below rel_tol * partial sum
// for quiet_terms consecutive levels and t/D_n > min_time_ratio. The tail
// bound extrapolates the last observed H and D ratios (not rigorous).
// Throws under_resolved, naming the depth needed, when the profile is too short.
KernelValue p_diag(const RayProfile& profile, double t, const DiagOptions& options = {});
// Curve form: unconverged points are returned flagged instead of throwing.
std::vector<KernelValue> p_diag_curve(const RayProfile& profile, std::span<const double> t,
                                      const DiagOptions& options = {});

// Profile depth estimated to resolve p_diag at time t.
std::size_t diag_levels_needed(const RayProfile& profile, double t,
                               const DiagOptions& options = {});

// Law of the meet level N(w, X_t) under P_w.
struct ShellDistribution {
  double t = 0.0;
  std::vector<double> q;          // q_n for n = 0..M
  double residual = 0.0;          // 1 - sum q_n as computed
  double analytic_residual = 0.0; // H_{M+1} p^{(M)} + exp(-t/D_M): mass of Sigma([w]_{M+1})
  bool under_resolved = false;    // analytic_residual > tolerance
  std::size_t suggested_levels = 0;

  std::size_t max_shell() const noexcept { return q.size() - 1; }
};

ShellDistribution shell_distribution(const RayProfile& profile, double t, std::size_t M,
                                     double tolerance = 1e-9);

enum class Metric { d, D };
const char* to_string(Metric m) noexcept;

struct MomentValue {
  double value = 0.0;        // sum over resolved shells
  double error_bound = 0.0;  // the true moment lies in [value, value + error_bound]
  std::size_t shells = 0;
};

// E_w[dist(w, X_t)^gamma] with dist = e^{-N} (d) or D_N (D). Uses every level
// of the profile; throws under_resolved when error_bound > rel_tol * value.
MomentValue moments(const RayProfile& profile, double t, double gamma, Metric metric,
                    double rel_tol = 1e-6);

// Comparison kernel: t/(D_N H_N) if t <= D_N, else 1/H_n with B_D(w,t) = Sigma([w]_n).
double q_t_reference(const RayProfile& profile, std::size_t N, double t);

// Pointwise check of the lower diagonal bound p_t(w,w) >= 1/(e H(B_D(w,t)))
// and the upper off-diagonal bound p_t <= t/(D_N H_N) for t <= D_N, every N.
struct BoundCheck {
  std::size_t lower_checked = 0, lower_violations = 0;
  std::size_t upper_checked = 0, upper_violations = 0;
  double worst_lower_ratio = 0.0;  // min of p_diag * e * H(ball), should be >= 1
  double worst_upper_ratio = 0.0;  // max of p_offdiag / bound, should be <= 1
};
BoundCheck check_kernel_bounds(const RayProfile& profile, std::span<const double> t);

// Integral of p_t(w, .) over Sigma([w]_L): H_L p^{(L-1)} + exp(-t/D_{L-1}).
double own_cell_integral(const RayProfile& profile, std::size_t L, double t);

struct MassCheck {
  double defect = 0.0;
  double own_cell_share = 0.0;
  std::size_t cells = 0;
};

// |sum over depth-L cells of p_t * HARM(cell) - 1|, with the cell of w
// integrated exactly. Throws under_resolved when that cell carries more
// than half of the mass.
MassCheck verify_mass(ElectricNetwork& net, const RayProfile& w, double t, std::size_t L);

struct CKCheck {
  double lhs = 0.0;  // cell sum of p_t(w, xi) p_s(xi, eta)
  double rhs = 0.0;  // p_{t+s}(w, eta)
  double rel_error = 0.0;
  double own_cell_share = 0.0;
  std::size_t cells = 0;
};

// Chapman-Kolmogorov at two distinct rays meeting above level L.
CKCheck verify_ck(ElectricNetwork& net, const RayProfile& w, const RayProfile& eta, double t,
                  double s, std::size_t L);

struct TrajectoryPoint {
  double time = 0.0;
  VertexId ray_prefix;
  std::size_t shell_drawn = 0;
};

struct TrajectoryOptions {
  std::size_t report_depth = 12;   // length of the reported prefixes
  std::size_t max_levels = 4000;   // profile extension cap before under_resolved
  std::size_t extend_step = 16;
};

// Grid-time sample of the boundary process started at `start`: each step
// draws the shell of the jump from shell_distribution(w, dt), extending the
// profile when the draw lands beyond it, then a landing ray from HARM on
// that shell.
std::vector<TrajectoryPoint> sample_trajectory(ElectricNetwork& net, RayProfile start,
                                               std::span<const double> times, Rng& rng,
                                               const TrajectoryOptions& options = {});

// JSON lines: a {"config_hash"} line, then {time, ray_prefix, shell_drawn} per point.
void write_trajectory_jsonl(std::ostream& os, std::span<const TrajectoryPoint> path,
                            const std::string& config_hash);

// CSV: t,value,tail_bound
void write_kernel_csv(std::ostream& os, std::span<const double> t,
                      std::span<const KernelValue> values, const std::string& config_hash);

}  // namespace gwheat
