#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwheat/tree.hpp"

namespace gwheat {

// Edge conductance between levels n and n+1 of the lambda-biased network.
double log_conductance(double lambda, std::int64_t level) noexcept;  // -n log(lambda)
double conductance(double lambda, std::int64_t level) noexcept;

// Throws not_transient unless 0 < lambda < m for every law used by the tree.
void require_transient(const LazyTree& tree, double lambda);

enum class Closure { grounded, deterministic_bound, heuristic_ray, converged };
const char* to_string(Closure c) noexcept;

// Bracket for the normalized resistance r(x) = lambda^{-h(x)} R(x), where
// R(x) is the resistance from x to infinity inside the subtree T(x).
struct ResistanceInterval {
  double log_lo = 0.0;
  double log_hi = 0.0;
  Closure closure_lo = Closure::grounded;
  Closure closure_hi = Closure::deterministic_bound;
  std::uint32_t depth_used = 0;
  bool resolved = false;  // gap target reached before the depth/visit caps

  double log_mid() const noexcept { return 0.5 * (log_lo + log_hi); }
  double mid() const noexcept;
  double lo() const noexcept;
  double hi() const noexcept;
  double log_gap() const noexcept { return log_hi - log_lo; }
};

// Adaptive deepening. Each round expands a branch while its estimated
// influence on the root value (product of lambda/k^2 along the path) is above
// a threshold; thresholds shrink geometrically until the gap target is met.
struct ResistancePolicy {
  double target_gap = 1e-6;         // on log r (relative gap)
  std::uint32_t max_depth = 1000;   // no vertex deeper than this below x is expanded
  double first_threshold = 1e-3;
  double threshold_step = 1e-2;     // threshold ratio between rounds
  double min_threshold = 1e-300;
  std::uint64_t visit_budget = 10'000'000;  // per vertex, summed over rounds
  double flow_tolerance = 1e-6;     // flag harmonic flows whose shares can move more
};

struct ResistanceWarning {
  VertexId vertex;
  double log_gap = 0.0;
  std::uint32_t depth_used = 0;
  std::string reason;
};

// alpha = 1 / (1 + lambda r): probability that the walk started at x never
// visits the parent of x, with x's own subtree as the only way out.
double escape_probability(double r, double lambda);

struct FlowSplit {
  std::vector<double> masses;      // parent_mass * share, per child
  std::vector<double> log_shares;  // log of the share of each child
  double spread = 0.0;             // worst-case share shift over the intervals
  bool flagged = false;            // spread > policy.flow_tolerance
};

// Two-terminal resistance solver for one lambda over one lazily grown tree.
// Intervals are computed once per materialized vertex and cached, so all
// consumers of a vertex see the same numbers.
class ElectricNetwork {
 public:
  ElectricNetwork(LazyTree& tree, double lambda, ResistancePolicy policy = {});

  LazyTree& tree() noexcept { return *tree_; }
  const LazyTree& tree() const noexcept { return *tree_; }
  double lambda() const noexcept { return lambda_; }
  const ResistancePolicy& policy() const noexcept { return policy_; }

  ResistanceInterval resistance(NodeId x);
  ResistanceInterval resistance(const VertexId& v) { return resistance(tree_->find(v)); }

  // Computes every vertex within `depth` levels below x, deepest first, so
  // that upper vertices are assembled from their cached children.
  void prefetch(NodeId x, std::size_t depth);

  // Child masses of the harmonic measure restricted to the cylinder of x,
  // given the mass of x. Shares are proportional to 1/(1 + lambda r(c)).
  FlowSplit harmonic_flow(NodeId x, double parent_mass = 1.0);

  const std::vector<ResistanceWarning>& warnings() const noexcept { return warnings_; }
  std::uint64_t warning_count() const noexcept { return warning_count_; }
  std::uint64_t visits() const noexcept { return visits_; }

 private:
  ResistanceInterval compute(NodeId x);
  std::optional<ResistanceInterval> from_children(NodeId x);
  void prepare_tables();

  LazyTree* tree_;
  double lambda_;
  ResistancePolicy policy_;
  std::vector<std::optional<ResistanceInterval>> cache_;
  std::vector<std::vector<double>> hom_lo_;  // indexed by branching number
  std::vector<std::vector<double>> hom_hi_;
  std::vector<ResistanceWarning> warnings_;
  std::uint64_t warning_count_ = 0;
  std::uint64_t visits_ = 0;
};

// Exhaustive solve of the subtree of v truncated at `depth` levels below v,
// closing every frontier vertex with normalized resistance `frontier_r`
// (0 = grounded). Returns the normalized resistance r(v).
double truncated_resistance(const LazyTree& tree, const VertexId& v, double lambda,
                            std::uint32_t depth, double frontier_r = 0.0);

// Same network solved by a sparse Laplacian factorization: every frontier
// vertex at `depth` is joined to a single terminal node through its closure
// resistance (a short when 0). Independent of the recursion above.
double resistance_oracle(const FiniteTree& ft, double lambda, double frontier_r = 0.0);

// CSV: path,h,log_r_lo,log_r_hi,closure_lo,closure_hi,depth_used
void write_resistance_csv_header(std::ostream& os, const std::string& config_hash);
void write_resistance_csv_row(std::ostream& os, const VertexId& v,
                              const ResistanceInterval& r);

}  // namespace gwheat
