#include "gwheat/boundary.hpp"

#include <cmath>
#include <functional>
#include <ostream>

#include "gwheat/error.hpp"
#include "gwheat/io.hpp"

namespace gwheat {

VertexId RayProfile::vertex(std::size_t n) const {
  if (n > path.size()) fail(ErrorCode::invalid_input, "level beyond profile");
  return VertexId(std::vector<std::uint32_t>(path.begin(), path.begin() + n));
}

double RayProfile::H(std::size_t n) const { return std::exp(log_H.at(n)); }
double RayProfile::D(std::size_t n) const { return std::exp(log_D.at(n)); }

RayProfile RayProfile::from_levels(double lambda, std::vector<double> log_H,
                                   std::vector<double> log_D) {
  if (log_H.size() != log_D.size() || log_H.empty())
    fail(ErrorCode::invalid_input, "profile level arrays must be nonempty and equal in size");
  RayProfile p;
  p.lambda = lambda;
  const std::size_t L = log_H.size() - 1;
  p.path.assign(L, 1);
  p.branching.assign(L, 0);
  p.log_R.resize(L + 1);
  for (std::size_t n = 0; n <= L; ++n) p.log_R[n] = log_D[n] - log_H[n];
  p.spread.assign(L + 1, 0.0);
  p.log_H = std::move(log_H);
  p.log_D = std::move(log_D);
  return p;
}

namespace {

std::size_t pick(std::span<const double> masses, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < masses.size(); ++i) {
    acc += masses[i];
    if (u < acc) return i;
  }
  return masses.size() - 1;
}

void push_level(ElectricNetwork& net, RayProfile& p, NodeId x, double log_H) {
  const auto r = net.resistance(x);
  const double n = static_cast<double>(p.log_H.size());
  p.nodes.push_back(x);
  p.log_H.push_back(log_H);
  p.log_R.push_back(n * std::log(net.lambda()) + r.log_mid());
  p.log_D.push_back(log_H + p.log_R.back());
  p.spread.push_back(r.log_gap());
}

void descend(ElectricNetwork& net, RayProfile& p, std::size_t target, Rng& rng) {
  auto& tree = net.tree();
  while (p.levels() < target) {
    const NodeId x = p.nodes.back();
    const auto flow = net.harmonic_flow(x, 1.0);
    p.max_flow_spread = std::max(p.max_flow_spread, flow.spread);
    const std::size_t i = pick(flow.masses, uniform01(rng));
    p.path.push_back(static_cast<std::uint32_t>(i + 1));
    p.branching.push_back(tree.child_count(x));
    push_level(net, p, tree.child(x, static_cast<std::uint32_t>(i + 1)),
               p.log_H.back() + flow.log_shares[i]);
  }
}

}  // namespace

RayProfile sample_ray(ElectricNetwork& net, std::size_t levels, Rng& rng) {
  if (levels < 1) fail(ErrorCode::invalid_input, "a ray needs at least one level");
  RayProfile p;
  p.lambda = net.lambda();
  push_level(net, p, net.tree().root(), 0.0);
  descend(net, p, levels, rng);
  check_profile(p);
  return p;
}

void extend_ray(ElectricNetwork& net, RayProfile& profile, std::size_t extra, Rng& rng) {
  if (profile.nodes.size() != profile.log_H.size())
    fail(ErrorCode::invalid_input, "cannot extend a profile not backed by a tree");
  descend(net, profile, profile.levels() + extra, rng);
  check_profile(profile);
}

RayProfile resample_below(ElectricNetwork& net, const RayProfile& profile, std::size_t n,
                          std::size_t levels, Rng& rng) {
  if (n >= profile.levels()) fail(ErrorCode::invalid_input, "resample level beyond profile");
  if (profile.nodes.size() != profile.log_H.size())
    fail(ErrorCode::invalid_input, "cannot resample a profile not backed by a tree");
  auto& tree = net.tree();
  const NodeId x = profile.nodes[n];
  const auto flow = net.harmonic_flow(x, 1.0);
  const std::size_t excluded = profile.path[n] - 1;
  if (flow.masses.size() < 2)
    fail(ErrorCode::invalid_input, "shell at a unary vertex has no mass");

  std::vector<double> masses = flow.masses;
  masses[excluded] = 0.0;
  double total = 0.0;
  for (double m : masses) total += m;
  for (double& m : masses) m /= total;

  RayProfile out;
  out.lambda = profile.lambda;
  out.path.assign(profile.path.begin(), profile.path.begin() + n);
  out.branching.assign(profile.branching.begin(), profile.branching.begin() + n);
  out.nodes.assign(profile.nodes.begin(), profile.nodes.begin() + n + 1);
  out.log_H.assign(profile.log_H.begin(), profile.log_H.begin() + n + 1);
  out.log_R.assign(profile.log_R.begin(), profile.log_R.begin() + n + 1);
  out.log_D.assign(profile.log_D.begin(), profile.log_D.begin() + n + 1);
  out.spread.assign(profile.spread.begin(), profile.spread.begin() + n + 1);
  out.max_flow_spread = std::max(profile.max_flow_spread, flow.spread);

  const std::size_t i = pick(masses, uniform01(rng));
  out.path.push_back(static_cast<std::uint32_t>(i + 1));
  out.branching.push_back(tree.child_count(x));
  push_level(net, out, tree.child(x, static_cast<std::uint32_t>(i + 1)),
             out.log_H.back() + flow.log_shares[i]);
  descend(net, out, std::max(levels, n + 1), rng);
  check_profile(out);
  return out;
}

std::size_t ball_to_cylinder_log(const RayProfile& profile, double log_r) {
  const std::size_t L = profile.levels();
  if (!(log_r > profile.log_D[L]))
    fail(ErrorCode::under_resolved,
         "ball radius below D at the deepest level " + std::to_string(L) + "; extend the profile");
  std::size_t n = 0;
  while (!(profile.log_D[n] < log_r)) ++n;
  return n;
}

std::size_t ball_to_cylinder(const RayProfile& profile, double r) {
  if (!(r > 0.0)) fail(ErrorCode::invalid_input, "ball radius must be positive");
  return ball_to_cylinder_log(profile, std::log(r));
}

void check_profile(const RayProfile& profile) {
  for (std::size_t n = 0; n + 1 < profile.log_D.size(); ++n) {
    const double rise = profile.log_D[n + 1] - profile.log_D[n];
    if (rise < 1e-9) continue;
    const double slack = std::max(profile.spread[n], profile.spread[n + 1]);
    fail(slack >= rise ? ErrorCode::under_resolved : ErrorCode::numerical,
         "D fails to decrease at level " + std::to_string(n + 1) + ": log D = " +
             format_double(profile.log_D[n]) + " then " + format_double(profile.log_D[n + 1]) +
             " (resistance spread " + format_double(slack) + ")");
  }
}

VDReport vd_diagnostic(const LazyTree& tree, std::size_t depth) {
  if (depth < 1) fail(ErrorCode::invalid_input, "vd_diagnostic needs depth >= 1");
  VDReport rep;
  rep.depth_scanned = depth;
  std::vector<std::uint32_t> path;
  std::function<void(const Cursor&)> visit = [&](const Cursor& c) {
    const auto k = tree.child_count(c);
    rep.max_branching = std::max(rep.max_branching, k);
    if (k == 1 && !rep.el_witness) rep.el_witness = VertexId(path);
    if (path.size() + 1 >= depth) return;
    for (std::uint32_t i = 1; i <= k; ++i) {
      path.push_back(i);
      visit(tree.child(c, i));
      path.pop_back();
    }
  };
  visit(tree.root_cursor());
  return rep;
}

std::vector<Cell> cells_at_depth(ElectricNetwork& net, std::size_t L) {
  std::vector<Cell> cells;
  auto& tree = net.tree();
  net.prefetch(tree.root(), L);
  std::vector<std::uint32_t> path;
  std::function<void(NodeId, double)> visit = [&](NodeId x, double log_H) {
    if (path.size() == L) {
      cells.push_back({VertexId(path), log_H});
      return;
    }
    const auto flow = net.harmonic_flow(x, 1.0);
    for (std::uint32_t i = 1; i <= flow.masses.size(); ++i) {
      path.push_back(i);
      visit(tree.child(x, i), log_H + flow.log_shares[i - 1]);
      path.pop_back();
    }
  };
  visit(tree.root(), 0.0);
  return cells;
}

void write_profile_csv(std::ostream& os, const RayProfile& p, const std::string& config_hash) {
  os << "# config_hash=" << config_hash << "\n"
     << "n,child_index,log_H,log_R,log_D,spread\n";
  for (std::size_t n = 0; n <= p.levels(); ++n) {
    os << n << ',';
    if (n < p.path.size()) os << p.path[n];
    os << ',' << format_double(p.log_H[n]) << ',' << format_double(p.log_R[n]) << ','
       << format_double(p.log_D[n]) << ',' << format_double(p.spread[n]) << '\n';
  }
}

}  // namespace gwheat
