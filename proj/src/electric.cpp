#include "gwheat/electric.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "gwheat/error.hpp"
#include "gwheat/io.hpp"
#include "gwheat/simd/kernels.hpp"
#include "resistance_dfs.hpp"

namespace gwheat {

double log_conductance(double lambda, std::int64_t level) noexcept {
  return -static_cast<double>(level) * std::log(lambda);
}

double conductance(double lambda, std::int64_t level) noexcept {
  return std::exp(log_conductance(lambda, level));
}

void require_transient(const LazyTree& tree, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    fail(ErrorCode::invalid_input, "lambda must be a positive finite number");
  for (std::size_t i = 0; i < tree.law_count(); ++i) {
    const double m = tree.law(static_cast<std::uint16_t>(i)).mean();
    if (lambda >= m)
      fail(ErrorCode::not_transient, "lambda=" + std::to_string(lambda) +
                                         " is not below the mean offspring m=" +
                                         std::to_string(m));
  }
}

const char* to_string(Closure c) noexcept {
  switch (c) {
    case Closure::grounded: return "grounded";
    case Closure::deterministic_bound: return "deterministic-bound";
    case Closure::heuristic_ray: return "heuristic-ray";
    case Closure::converged: return "converged";
  }
  return "unknown";
}

double ResistanceInterval::mid() const noexcept { return std::exp(log_mid()); }
double ResistanceInterval::lo() const noexcept { return std::exp(log_lo); }
double ResistanceInterval::hi() const noexcept { return std::exp(log_hi); }

double escape_probability(double r, double lambda) {
  if (!(r >= 0.0)) fail(ErrorCode::invalid_input, "resistance must be nonnegative");
  return 1.0 / (1.0 + lambda * r);
}

namespace {

// lo[j] / hi[j]: root value of the b-ary tree truncated at depth j, with
// frontier closed at 0 / closure_hi. Accumulation order matches the DFS.
void build_table(std::uint32_t b, double lambda, double closure_hi, std::uint32_t max_depth,
                 std::vector<double>& lo, std::vector<double>& hi) {
  lo.assign(max_depth + 1, 0.0);
  hi.assign(max_depth + 1, 0.0);
  hi[0] = closure_hi;
  for (std::uint32_t j = 1; j <= max_depth; ++j) {
    double acc_lo = 0.0, acc_hi = 0.0;
    const double w_lo = 1.0 / (1.0 + lambda * lo[j - 1]);
    const double w_hi = 1.0 / (1.0 + lambda * hi[j - 1]);
    for (std::uint32_t i = 0; i < b; ++i) {
      acc_lo = acc_lo + w_lo;
      acc_hi = acc_hi + w_hi;
    }
    lo[j] = 1.0 / acc_lo;
    hi[j] = 1.0 / acc_hi;
  }
}

void build_tables(const LazyTree& tree, double lambda, double closure_hi,
                  std::uint32_t max_depth, std::vector<std::vector<double>>& lo,
                  std::vector<std::vector<double>>& hi) {
  for (std::size_t i = 0; i < tree.law_count(); ++i) {
    const auto b = tree.law(static_cast<std::uint16_t>(i)).degenerate();
    if (!b) continue;
    if (lo.size() <= *b) {
      lo.resize(*b + 1);
      hi.resize(*b + 1);
    }
    if (lo[*b].size() != max_depth + 1) build_table(*b, lambda, closure_hi, max_depth, lo[*b], hi[*b]);
  }
}

detail::DfsResult run_dfs(const LazyTree& tree, const Cursor& start, const detail::DfsConfig& cfg) {
  if (simd::active_isa() == simd::Isa::avx2) return detail::resistance_dfs_avx2(tree, start, cfg);
  return detail::resistance_dfs_scalar(tree, start, cfg);
}

}  // namespace

ElectricNetwork::ElectricNetwork(LazyTree& tree, double lambda, ResistancePolicy policy)
    : tree_(&tree), lambda_(lambda), policy_(policy) {
  require_transient(tree, lambda);
  if (!(policy.first_threshold > 0.0 && policy.first_threshold < 1.0) ||
      !(policy.threshold_step > 0.0 && policy.threshold_step < 1.0) || !(policy.target_gap > 0.0))
    fail(ErrorCode::invalid_input, "invalid resistance policy");
}

void ElectricNetwork::prepare_tables() {
  const double closure = lambda_ < 1.0 ? 1.0 / (1.0 - lambda_) : 0.0;
  build_tables(*tree_, lambda_, closure, policy_.max_depth, hom_lo_, hom_hi_);
}

ResistanceInterval ElectricNetwork::resistance(NodeId x) {
  const auto i = static_cast<std::size_t>(x);
  if (cache_.size() <= i) cache_.resize(std::max(tree_->materialized(), i + 1));
  if (!cache_[i]) {
    auto r = compute(x);
    if (cache_.size() <= i) cache_.resize(i + 1);
    cache_[i] = r;
  }
  return *cache_[i];
}

std::optional<ResistanceInterval> ElectricNetwork::from_children(NodeId x) {
  if (!tree_->expanded(x)) return std::nullopt;
  const std::uint32_t k = tree_->child_count(x);
  std::vector<ResistanceInterval> kids;
  kids.reserve(k);
  for (std::uint32_t i = 1; i <= k; ++i) {
    const auto c = static_cast<std::size_t>(tree_->child(x, i));
    if (c >= cache_.size() || !cache_[c]) return std::nullopt;
    kids.push_back(*cache_[c]);
  }
  // 1/r = sum 1/(1 + lambda r_c) is increasing in every r_c, so the child
  // brackets map to a bracket with a gap no wider than theirs.
  double sum_lo = 0.0, sum_hi = 0.0;
  ResistanceInterval out;
  out.resolved = true;
  out.closure_hi = lambda_ < 1.0 ? Closure::deterministic_bound : Closure::converged;
  for (const auto& c : kids) {
    sum_lo += 1.0 / (1.0 + lambda_ * c.lo());
    sum_hi += 1.0 / (1.0 + lambda_ * c.hi());
    out.resolved = out.resolved && c.resolved;
    if (c.closure_hi == Closure::heuristic_ray) out.closure_hi = Closure::heuristic_ray;
    out.depth_used = std::max(out.depth_used, c.depth_used + 1);
  }
  out.log_lo = -std::log(sum_lo);
  out.log_hi = std::max(-std::log(sum_hi), out.log_lo);
  if (!out.resolved) return std::nullopt;
  return out;
}

void ElectricNetwork::prefetch(NodeId x, std::size_t depth) {
  std::vector<std::vector<NodeId>> levels{{x}};
  for (std::size_t n = 0; n < depth; ++n) {
    std::vector<NodeId> next;
    for (NodeId v : levels.back())
      for (std::uint32_t i = 1; i <= tree_->child_count(v); ++i) next.push_back(tree_->child(v, i));
    levels.push_back(std::move(next));
  }
  for (auto it = levels.rbegin(); it != levels.rend(); ++it)
    for (NodeId v : *it) resistance(v);
}

ResistanceInterval ElectricNetwork::compute(NodeId x) {
  if (auto r = from_children(x)) return *r;
  prepare_tables();
  const bool bounded = lambda_ < 1.0;
  const double lane_ratio = 1.0 / std::sqrt(policy_.threshold_step);

  detail::DfsConfig cfg;
  cfg.lambda = lambda_;
  cfg.closure_hi = bounded ? 1.0 / (1.0 - lambda_) : 0.0;
  cfg.max_depth = policy_.max_depth;
  cfg.hom_lo = &hom_lo_;
  cfg.hom_hi = &hom_hi_;

  ResistanceInterval out;
  out.closure_lo = Closure::grounded;
  std::uint64_t spent = 0;
  bool have_round = false;
  std::string stop_reason;

  for (double threshold = policy_.first_threshold;; threshold *= policy_.threshold_step) {
    cfg.thresholds = {threshold, threshold * lane_ratio, threshold * lane_ratio * lane_ratio};
    cfg.visit_budget = policy_.visit_budget > spent ? policy_.visit_budget - spent : 0;
    const auto res = run_dfs(*tree_, tree_->cursor(x), cfg);
    spent += res.visits;
    visits_ += res.visits;

    // An interrupted round still gives a valid bracket when lambda < 1, but
    // its lanes are not comparable, so for lambda >= 1 the previous round
    // stands.
    if (res.budget_hit && (have_round || !bounded)) {
      if (!have_round) {
        out.log_lo = std::log(res.lanes[0]);
        out.log_hi = out.log_lo;
        out.closure_hi = Closure::heuristic_ray;
        out.depth_used = res.depth_reached;
      }
      stop_reason = "visit budget exhausted";
      break;
    }

    const double lo = res.lanes[0];
    double hi;
    bool done;
    if (bounded) {
      hi = res.lanes[3];
      done = std::log(hi) - std::log(lo) <= policy_.target_gap;
      out.closure_hi = Closure::deterministic_bound;
    } else {
      const double d1 = lo - res.lanes[1];
      const double d2 = res.lanes[1] - res.lanes[2];
      double rho = d1 > 0.0 ? 0.95 : 0.0;
      if (d1 > 0.0 && d2 > 0.0) rho = std::clamp(d1 / d2, 0.0, 0.95);
      hi = lo + d1 * rho / (1.0 - rho);
      // Successive rounds (lane 2 repeats the previous round's threshold)
      // must agree, which also guards against a lane band with no vertices.
      done = lo - res.lanes[2] <= policy_.target_gap * lo &&
             std::log(hi) - std::log(lo) <= policy_.target_gap;
      out.closure_hi = done ? Closure::converged : Closure::heuristic_ray;
    }
    const bool stalled = have_round && std::log(lo) == out.log_lo &&
                         std::max(std::log(hi), std::log(lo)) == out.log_hi;
    out.log_lo = std::log(lo);
    out.log_hi = std::max(std::log(hi), out.log_lo);
    out.depth_used = res.depth_reached;
    have_round = true;
    if (done) {
      out.resolved = true;
      break;
    }
    if (res.budget_hit) {
      stop_reason = "visit budget exhausted";
      break;
    }
    if (stalled) {
      stop_reason = "depth cap reached";
      break;
    }
    if (threshold * policy_.threshold_step < policy_.min_threshold) {
      stop_reason = "threshold floor reached";
      break;
    }
  }

  if (!out.resolved) {
    ++warning_count_;
    if (warnings_.size() < 1000)
      warnings_.push_back({tree_->path(x), out.log_gap(), out.depth_used, stop_reason});
  }
  return out;
}

FlowSplit ElectricNetwork::harmonic_flow(NodeId x, double parent_mass) {
  const std::uint32_t k = tree_->child_count(x);
  std::vector<double> w_mid(k), w_lo(k), w_hi(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto r = resistance(tree_->child(x, i + 1));
    // A larger resistance means a smaller branch weight.
    w_mid[i] = 1.0 / (1.0 + lambda_ * r.mid());
    w_lo[i] = 1.0 / (1.0 + lambda_ * r.hi());
    w_hi[i] = 1.0 / (1.0 + lambda_ * r.lo());
  }
  double sum_mid = 0.0, sum_lo = 0.0, sum_hi = 0.0;
  for (std::uint32_t i = 0; i < k; ++i) {
    sum_mid += w_mid[i];
    sum_lo += w_lo[i];
    sum_hi += w_hi[i];
  }

  FlowSplit split;
  split.masses.resize(k);
  split.log_shares.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    const double share = w_mid[i] / sum_mid;
    split.masses[i] = parent_mass * share;
    split.log_shares[i] = std::log(share);
    const double best = w_hi[i] / (w_hi[i] + (sum_lo - w_lo[i]));
    const double worst = w_lo[i] / (w_lo[i] + (sum_hi - w_hi[i]));
    split.spread = std::max({split.spread, best - share, share - worst});
  }
  split.flagged = split.spread > policy_.flow_tolerance;
  return split;
}

double truncated_resistance(const LazyTree& tree, const VertexId& v, double lambda,
                            std::uint32_t depth, double frontier_r) {
  if (!(lambda > 0.0)) fail(ErrorCode::invalid_input, "lambda must be positive");
  if (depth == 0) return frontier_r;
  std::vector<std::vector<double>> lo, hi;
  build_tables(tree, lambda, frontier_r, depth, lo, hi);
  detail::DfsConfig cfg;
  cfg.lambda = lambda;
  cfg.closure_hi = frontier_r;
  cfg.thresholds = {-1.0, -1.0, -1.0};
  cfg.max_depth = depth;
  cfg.visit_budget = UINT64_MAX;
  cfg.hom_lo = &lo;
  cfg.hom_hi = &hi;
  const auto res = run_dfs(tree, tree.locate(v), cfg);
  return frontier_r == 0.0 ? res.lanes[0] : res.lanes[3];
}

double resistance_oracle(const FiniteTree& ft, double lambda, double frontier_r) {
  if (ft.depth == 0) fail(ErrorCode::invalid_input, "oracle needs depth >= 1");
  if (ft.depth > 14) fail(ErrorCode::resource_limit, "oracle depth cap is 14");
  const bool shorted = frontier_r == 0.0;

  // Unknown potentials: every vertex above the frontier, plus the frontier
  // itself when it connects to the terminal through a resistor. The terminal
  // is held at potential 0 and eliminated.
  std::vector<std::uint64_t> level_start(ft.depth + 2, 0);
  for (std::size_t n = 0; n <= ft.depth; ++n)
    level_start[n + 1] = level_start[n] + ft.generation_sizes[n];
  const std::size_t interior = level_start[ft.depth];
  const std::size_t unknowns = shorted ? interior : level_start[ft.depth + 1];

  std::vector<Eigen::Triplet<double>> entries;
  auto connect = [&](std::size_t a, std::optional<std::size_t> b, double g) {
    entries.emplace_back(a, a, g);
    if (b) {
      entries.emplace_back(*b, *b, g);
      entries.emplace_back(a, *b, -g);
      entries.emplace_back(*b, a, -g);
    }
  };

  for (std::size_t n = 0; n < ft.depth; ++n) {
    const double g = std::pow(lambda, -static_cast<double>(n));
    const auto offsets = ft.child_offsets(n);
    for (std::size_t i = 0; i < ft.generation_sizes[n]; ++i) {
      const std::size_t parent = level_start[n] + i;
      for (std::uint64_t c = offsets[i]; c < offsets[i + 1]; ++c) {
        const std::size_t child = level_start[n + 1] + c;
        if (child >= unknowns)
          connect(parent, std::nullopt, g);
        else
          connect(parent, child, g);
      }
    }
  }
  if (!shorted) {
    // Frontier closure r is normalized at the frontier vertex.
    const double g = 1.0 / (std::pow(lambda, static_cast<double>(ft.depth)) * frontier_r);
    for (std::size_t i = level_start[ft.depth]; i < unknowns; ++i) connect(i, std::nullopt, g);
  }

  Eigen::SparseMatrix<double> L(static_cast<Eigen::Index>(unknowns),
                                static_cast<Eigen::Index>(unknowns));
  L.setFromTriplets(entries.begin(), entries.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
  if (solver.info() != Eigen::Success) fail(ErrorCode::internal, "singular Laplacian");
  Eigen::VectorXd current = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns));
  current[0] = 1.0;
  const Eigen::VectorXd potential = solver.solve(current);
  if (solver.info() != Eigen::Success) fail(ErrorCode::internal, "Laplacian solve failed");
  return potential[0];
}

void write_resistance_csv_header(std::ostream& os, const std::string& config_hash) {
  os << "# config_hash=" << config_hash << "\n"
     << "path,h,log_r_lo,log_r_hi,closure_lo,closure_hi,depth_used\n";
}

void write_resistance_csv_row(std::ostream& os, const VertexId& v,
                              const ResistanceInterval& r) {
  std::string path;
  for (const auto i : v.path()) path += (path.empty() ? "" : ":") + std::to_string(i);
  os << path << ',' << v.height() << ',' << format_double(r.log_lo) << ','
     << format_double(r.log_hi) << ','
     << to_string(r.closure_lo) << ',' << to_string(r.closure_hi) << ',' << r.depth_used << '\n';
}

}  // namespace gwheat
