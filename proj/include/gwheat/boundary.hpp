#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwheat/electric.hpp"
#include "gwheat/rng.hpp"
#include "gwheat/tree.hpp"

namespace gwheat {

// A ray prefix w_0 = o, ..., w_L together with the per-level quantities
// that drive the boundary heat kernel, all as natural logs:
//   log_H[n]  harmonic measure of the cylinder Sigma([w]_n)
//   log_R[n]  original-scale resistance  h log(lambda) + log r([w]_n)
//   log_D[n]  log_H[n] + log_R[n]
struct RayProfile {
  double lambda = 1.0;
  std::vector<std::uint32_t> path;       // size L: child index taken at level n
  std::vector<std::uint32_t> branching;  // size L: child count of w_n
  std::vector<NodeId> nodes;             // size L+1 (empty for synthetic profiles)
  std::vector<double> log_H, log_R, log_D;
  std::vector<double> spread;            // log-gap of the resistance interval at w_n
  double max_flow_spread = 0.0;

  std::size_t levels() const noexcept { return log_H.empty() ? 0 : log_H.size() - 1; }
  VertexId vertex(std::size_t n) const;
  double H(std::size_t n) const;
  double D(std::size_t n) const;

  // Profile from given level arrays (for closed-form fixtures).
  static RayProfile from_levels(double lambda, std::vector<double> log_H,
                                std::vector<double> log_D);
};

// Descends `levels` steps from the root choosing each child with its
// harmonic-flow share (exact HARM sampling given the resistances).
RayProfile sample_ray(ElectricNetwork& net, std::size_t levels, Rng& rng);

// Continues an existing profile by `extra` levels.
void extend_ray(ElectricNetwork& net, RayProfile& profile, std::size_t extra, Rng& rng);

// A ray distributed as HARM conditioned on Sigma([w]_n) \ Sigma([w]_{n+1}):
// keeps levels 0..n, steps to a child of w_n other than w_{n+1} with
// renormalized shares, then descends to `levels` total.
RayProfile resample_below(ElectricNetwork& net, const RayProfile& profile, std::size_t n,
                          std::size_t levels, Rng& rng);

// The unique n with D_n < r <= D_{n-1} (D_{-1} = infinity), so that the open
// ball B_D(w, r) equals Sigma([w]_n). Throws under_resolved when r <= D_L.
std::size_t ball_to_cylinder(const RayProfile& profile, double r);
std::size_t ball_to_cylinder_log(const RayProfile& profile, double log_r);

// Checks that D_n decreases strictly (relative tolerance 1e-9). A violation
// within the resistance spread throws under_resolved, otherwise numerical.
void check_profile(const RayProfile& profile);

struct VDReport {
  std::optional<VertexId> el_witness;  // first vertex with exactly one child
  std::uint32_t max_branching = 0;
  std::size_t depth_scanned = 0;
};

// Scans vertices of height 0..depth-1 in lexicographic order.
VDReport vd_diagnostic(const LazyTree& tree, std::size_t depth);

struct Cell {
  VertexId vertex;
  double log_H = 0.0;
};

// All vertices at height L with their harmonic measure, lexicographic.
std::vector<Cell> cells_at_depth(ElectricNetwork& net, std::size_t L);

// CSV: n,child_index,log_H,log_R,log_D,spread (child_index empty at n = L).
void write_profile_csv(std::ostream& os, const RayProfile& profile,
                       const std::string& config_hash);

}  // namespace gwheat
