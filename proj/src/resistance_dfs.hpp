#pragma once

// Four-lane bottom-up evaluation of the resistance recursion
//   1/r(x) = sum_c 1/(1 + lambda r(c))
// over a pruned subtree. Lane layout:
//   0  grounded value at the finest threshold
//   1  grounded value at the middle threshold
//   2  grounded value at the coarsest threshold
//   3  value with frontier closed at `closure_hi`, finest threshold
// A vertex is expanded for a lane while depth remains and its influence
// proxy exceeds the lane threshold. Only out-of-line LazyTree members are
// called here, so the AVX2 instantiation emits no shared inline code. Lane arithmetic is supplied by Ops so the
// same traversal runs with scalar or vector registers; Ops must use plain
// IEEE mul/add/div so all variants agree bit for bit.

#include <array>
#include <cstdint>
#include <vector>

#include "gwheat/tree.hpp"

namespace gwheat::detail {

struct DfsConfig {
  double lambda = 1.0;
  double closure_hi = 0.0;
  std::array<double, 3> thresholds{};  // finest first
  std::uint32_t max_depth = 0;
  std::uint64_t visit_budget = 0;
  // hom_lo[b][j], hom_hi[b][j]: depth-j truncation of the b-ary tree.
  const std::vector<std::vector<double>>* hom_lo = nullptr;
  const std::vector<std::vector<double>>* hom_hi = nullptr;
};

struct DfsResult {
  std::array<double, 4> lanes{};
  std::uint64_t visits = 0;
  std::uint32_t depth_reached = 0;
  bool budget_hit = false;
};

DfsResult resistance_dfs_scalar(const LazyTree& tree, const Cursor& start, const DfsConfig& cfg);
DfsResult resistance_dfs_avx2(const LazyTree& tree, const Cursor& start, const DfsConfig& cfg);

template <class Ops>
class ResistanceDfs {
 public:
  using V = typename Ops::V;

  ResistanceDfs(const LazyTree& tree, const DfsConfig& cfg) : tree_(tree), cfg_(cfg) {}

  DfsResult run(const Cursor& start) {
    DfsResult res;
    res.lanes = Ops::store(solve(start, cfg_.max_depth, 1.0, 0));
    res.visits = visits_;
    res.depth_reached = depth_reached_;
    res.budget_hit = budget_hit_;
    return res;
  }

 private:
  // Number of levels a b-ary subtree is expanded for one threshold.
  static std::uint32_t homogeneous_levels(double p, double factor, double threshold,
                                          std::uint32_t remaining) noexcept {
    std::uint32_t j = 0;
    while (j < remaining && p > threshold) {
      ++j;
      p *= factor;
    }
    return j;
  }

  V solve(const Cursor& c, std::uint32_t remaining, double p, std::uint32_t level) {
    ++visits_;
    if (level > depth_reached_) depth_reached_ = level;
    unsigned active = 0;
    if (remaining > 0)
      for (unsigned l = 0; l < 3; ++l)
        if (p > cfg_.thresholds[l]) active |= 1u << l;
    if (active == 0) return Ops::closure(cfg_.closure_hi);
    if (visits_ > cfg_.visit_budget) {
      budget_hit_ = true;
      return Ops::closure(cfg_.closure_hi);
    }

    if (const std::uint32_t b = tree_.homogeneous_branching(c)) {
      const double factor = cfg_.lambda / (static_cast<double>(b) * static_cast<double>(b));
      std::array<std::uint32_t, 3> j{};
      for (unsigned l = 0; l < 3; ++l)
        j[l] = homogeneous_levels(p, factor, cfg_.thresholds[l], remaining);
      if (level + j[0] > depth_reached_) depth_reached_ = level + j[0];
      const auto& lo = (*cfg_.hom_lo)[b];
      const auto& hi = (*cfg_.hom_hi)[b];
      return Ops::set(lo[j[0]], lo[j[1]], lo[j[2]], hi[j[0]]);
    }

    const std::uint32_t k = tree_.child_count(c);
    const double factor = cfg_.lambda / (static_cast<double>(k) * static_cast<double>(k));
    V acc = Ops::zero();
    for (std::uint32_t i = 1; i <= k; ++i)
      acc = Ops::add_branch(acc, solve(tree_.child(c, i), remaining - 1, p * factor, level + 1),
                            cfg_.lambda);
    V r = Ops::reciprocal(acc);
    if (active != 0b111u) r = Ops::ground_lanes(r, active);
    return r;
  }

  const LazyTree& tree_;
  const DfsConfig& cfg_;
  std::uint64_t visits_ = 0;
  std::uint32_t depth_reached_ = 0;
  bool budget_hit_ = false;
};

}  // namespace gwheat::detail
