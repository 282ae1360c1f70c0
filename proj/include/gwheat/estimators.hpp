#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwheat/heat.hpp"
#include "gwheat/offspring.hpp"

namespace gwheat {

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  double window_lo = 0.0, window_hi = 0.0;  // range of x actually used
};

// Least squares of log y on log x over the points with x in [lo, hi].
// Needs >= 3 points; throws invalid_input on nonpositive y inside the window.
ExponentFit fit_loglog(std::span<const double> x, std::span<const double> y, double lo = 0.0,
                       double hi = std::numeric_limits<double>::infinity());
// Least squares of log y on x (exponential decay fits).
ExponentFit fit_loglinear(std::span<const double> x, std::span<const double> y,
                          double lo = -std::numeric_limits<double>::infinity(),
                          double hi = std::numeric_limits<double>::infinity());
// Plain least squares of y on x.
ExponentFit fit_linear(std::span<const double> x, std::span<const double> y);

struct ExponentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t replicates = 0;
  std::vector<double> per_replicate;
  std::optional<std::pair<double, double>> window;
  std::optional<double> r2;
};

// Mean and standard error of the per-replicate values.
ExponentEstimate summarize(std::vector<double> values);

struct ExponentTargets {
  double beta = 0.0;
  double log_lambda = 0.0;

  // Throws invalid_input unless beta - log lambda > 0.
  static ExponentTargets make(double beta, double lambda);
  double kappa() const noexcept { return beta / (beta - log_lambda); }
  double walk_exponent() const noexcept;                 // (beta - log lambda) v 1
  double displacement_d(double gamma) const noexcept;  // (gamma / (beta - log lambda)) ^ 1
  double displacement_D(double gamma) const noexcept;  // gamma ^ 1
};

struct ReplicateOptions {
  ResistancePolicy policy = [] {
    ResistancePolicy p;
    p.target_gap = 1e-4;
    return p;
  }();
  unsigned workers = 1;
};

// Replicate i grows tree seed derive_seed(seed, 2i) and samples with stream 2i+1.
ExponentEstimate estimate_beta_ray(const OffspringDistribution& dist, double lambda,
                                   std::size_t n_levels, std::size_t replicates,
                                   std::uint64_t seed, const ReplicateOptions& options = {});

// Slope of log R_n on n over [n_levels/2, n_levels] along a HARM ray.
ExponentEstimate estimate_resistance_exponent(const OffspringDistribution& dist, double lambda,
                                              std::size_t n_levels, std::size_t replicates,
                                              std::uint64_t seed,
                                              const ReplicateOptions& options = {});

struct ThetaEstimate {
  double theta = 0.0;
  bool flagged = false;  // a nonpositive denominator was met
};

// theta(T) = mean over the pool of alpha' EC(T) / (lambda - 1 + alpha' + EC(T)).
ThetaEstimate estimate_theta(ElectricNetwork& net, std::span<const double> alpha_pool);
// Same with a pool of n_inner fresh trees drawn from `seed`.
ThetaEstimate estimate_theta(const OffspringDistribution& dist, ElectricNetwork& net,
                             std::size_t n_inner, std::uint64_t seed,
                             const ReplicateOptions& options = {});

// Escape probabilities of `count` fresh trees (seeds derived from `seed`).
std::vector<double> alpha_pool(const OffspringDistribution& dist, double lambda, std::size_t count,
                               std::uint64_t seed, const ReplicateOptions& options = {});

struct StationaryEstimate {
  ExponentEstimate beta;       // weighted mean of the first-step entropy
  double h = 0.0;              // mean theta over the outer trees
  std::vector<double> theta;   // per outer tree
  std::vector<double> entropy; // -sum_c s_c log s_c at the root, per outer tree
  std::size_t flagged = 0;
};

// All outer trees share one alpha pool of n_inner trees, so theta estimates
// are correlated; the standard error is the delta-method ratio error over the
// outer trees and ignores that correlation.
StationaryEstimate beta_stationary(const OffspringDistribution& dist, double lambda,
                                   std::size_t n_outer, std::size_t n_inner, std::uint64_t seed,
                                   const ReplicateOptions& options = {});

struct ScanPoint {
  double t = 0.0;
  double value = 0.0;
  bool used = false;  // inside the resolved window
};

struct CurveFit {
  std::vector<ScanPoint> points;
  ExponentFit fit;
  double target = 0.0;
  std::size_t trimmed_small = 0, trimmed_large = 0;
};

struct HeatScan {
  CurveFit diagonal;     // target -kappa
  CurveFit offdiagonal;  // target 1
  std::size_t meet_level = 0;
};

// Small-t points are dropped when unresolved by the profile, large-t points
// when t exceeds D at level `crossover_level` (the scaling regime is t -> 0).
struct ScanOptions {
  std::size_t meet_level = 1;
  std::size_t crossover_level = 2;
  double moment_rel_tol = 1e-6;
};

HeatScan heat_exponent_scan(const RayProfile& profile, std::span<const double> t_grid,
                            const ExponentTargets& targets, const ScanOptions& options = {});

struct DisplacementFit {
  double gamma = 0.0;
  Metric metric = Metric::d;
  CurveFit curve;  // target (gamma / (beta - log lambda)) ^ 1 for d, gamma ^ 1 for D
};

std::vector<DisplacementFit> displacement_scan(const RayProfile& profile,
                                               std::span<const double> gammas,
                                               std::span<const double> t_grid,
                                               const ExponentTargets& targets,
                                               const ScanOptions& options = {});

struct MetricBridge {
  DisplacementFit d, D;
  std::vector<double> ratio_trace;  // log D_n / (-n), n = 1..L
  double ratio_target = 0.0;        // beta - log lambda
};

MetricBridge displacement_metric_bridge(const RayProfile& profile, double gamma,
                                        std::span<const double> t_grid,
                                        const ExponentTargets& targets,
                                        const ScanOptions& options = {});

enum class TailModel { bounded, log_linear, log_log };
const char* to_string(TailModel m) noexcept;

struct TailScan {
  std::vector<double> samples;  // sorted R(o) midpoints or truncated lower bounds
  std::vector<double> survival; // P(R > samples[i]) = (n - 1 - i) / n
  TailModel model = TailModel::bounded;
  std::optional<ExponentFit> fit;
  double max_sample = 0.0;
  double bound = 0.0;           // 1/(1 - lambda) when lambda < 1
  std::size_t exceedances = 0;  // samples above the fit window start
  std::size_t unresolved = 0;
  bool heavy_tail_warning = false;
  std::vector<std::string> notes;
};

struct TailOptions {
  ReplicateOptions replicate;
  double window_quantile = 0.9;  // fit the survival curve above this quantile
  std::size_t min_exceedances = 30;
  // When nonzero, each sample is the grounded resistance of the tree cut at
  // this depth: a lower bound on R(o) that is cheap when lambda > 1.
  std::uint32_t truncation_depth = 0;
};

TailScan tail_scan(const OffspringDistribution& dist, double lambda, std::size_t replicates,
                   std::uint64_t seed, const TailOptions& options = {});

// {estimator, value, stderr, replicates, window, r2, targets:{...}, seed, config_hash}
std::string estimate_json(const std::string& estimator, const ExponentEstimate& e,
                          const std::optional<ExponentTargets>& targets, std::uint64_t seed,
                          const std::string& config_hash);

}  // namespace gwheat
