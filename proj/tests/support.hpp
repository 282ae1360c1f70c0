#pragma once

// Shared fixtures and small random generators for property tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "gwheat/boundary.hpp"
#include "gwheat/offspring.hpp"
#include "gwheat/rng.hpp"
#include "gwheat/tree.hpp"

namespace gwtest {

inline gwheat::OffspringDistribution binary() { return gwheat::parse_offspring("pmf:2=1"); }
inline gwheat::OffspringDistribution ternary() { return gwheat::parse_offspring("pmf:3=1"); }
inline gwheat::OffspringDistribution coin() { return gwheat::parse_offspring("pmf:1=0.5,2=0.5"); }

// Root with a binary subtree under child 1 and a ternary subtree under child 2.
inline gwheat::LazyTree mixed_root() {
  gwheat::LazyTree t(binary(), 7);
  t.graft(gwheat::VertexId{2}, ternary());
  return t;
}

// Random explicit pmf on {1..kmax} with mean > 1 and p_1 < 1.
inline gwheat::OffspringDistribution random_pmf(gwheat::Rng& rng, std::uint32_t kmax = 4) {
  for (;;) {
    std::vector<std::pair<std::uint32_t, double>> w;
    double total = 0.0;
    for (std::uint32_t k = 1; k <= kmax; ++k) {
      const double x = gwheat::uniform01(rng);
      if (x < 0.3) continue;
      w.emplace_back(k, x);
      total += x;
    }
    if (w.empty()) continue;
    double mean = 0.0;
    for (auto& kw : w) {
      kw.second /= total;
      mean += kw.first * kw.second;
    }
    // Renormalize exactly so the 1e-12 sum check passes.
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) s += w[i].second;
    w.back().second = 1.0 - s;
    if (mean > 1.05 && w.back().second > 0.0) return gwheat::OffspringDistribution::from_pmf(w);
  }
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Binary tree at lambda: H_n = 2^-n, D_n = (lambda/2)^n / (2 - lambda).
inline gwheat::RayProfile binary_profile(double lambda, int L) {
  std::vector<double> lh, ld;
  for (int n = 0; n <= L; ++n) {
    lh.push_back(-n * std::log(2.0));
    ld.push_back(n * std::log(lambda / 2.0) - std::log(2.0 - lambda));
  }
  return gwheat::RayProfile::from_levels(lambda, lh, ld);
}

inline std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1));
  return t;
}

}  // namespace gwtest
