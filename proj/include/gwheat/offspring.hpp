#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gwheat {

// Offspring law of a supercritical Galton-Watson tree without leaves.
//
// Two families are supported:
//   explicit pmf       "pmf:k1=w1,k2=w2,..."   (every k >= 1)
//   shifted geometric  "geom:q"                 p_k = (1-q) q^(k-1), k >= 1
//
// p_0 = 0 holds by construction. Construction rejects p_1 = 1 and means
// m <= 1. Explicit pmfs are sampled by cumulative search over the sorted
// support; the shifted geometric law by exact inverse transform, so its
// support is never truncated.
class OffspringDistribution {
 public:
  enum class Kind { explicit_pmf, shifted_geometric };

  static OffspringDistribution from_pmf(
      std::vector<std::pair<std::uint32_t, double>> weights);
  static OffspringDistribution shifted_geometric(double q);

  Kind kind() const noexcept { return kind_; }
  double mean() const noexcept { return mean_; }
  double geometric_q() const noexcept { return q_; }

  // Probability of exactly k children (k = 0 gives 0).
  double probability(std::uint32_t k) const noexcept;

  // Mean recomputed from the parameters, independent of the stored value.
  double recomputed_mean() const noexcept;

  // Support as (k, p_k) pairs; empty for the geometric family.
  const std::vector<std::pair<std::uint32_t, double>>& support() const noexcept {
    return pmf_;
  }

  // The constant child count when the law is a point mass.
  std::optional<std::uint32_t> degenerate() const noexcept;

  // Child count for a uniform u in [0, 1).
  std::uint32_t sample(double u) const noexcept;

  // Canonical text form, parseable by parse_offspring().
  std::string to_string() const;

 private:
  OffspringDistribution() = default;
  void finalize();

  Kind kind_ = Kind::explicit_pmf;
  std::vector<std::pair<std::uint32_t, double>> pmf_;
  std::vector<double> cdf_;
  double q_ = 0.0;
  double log_q_ = 0.0;
  double mean_ = 0.0;
};

OffspringDistribution parse_offspring(std::string_view spec);

}  // namespace gwheat
