#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwheat/electric.hpp"
#include "gwheat/rng.hpp"
#include "gwheat/tree.hpp"

namespace gwheat {

// Position of a lambda-biased walk, held as the cursor stack from the root
// so that no tree memo is needed. With `extra_root` the tree hangs below an
// additional vertex (depth -1), and the root is an ordinary vertex whose
// parent is that extra vertex.
class Walker {
 public:
  Walker(const LazyTree& tree, double lambda, bool extra_root = false);

  // One transition: towards the parent with probability lambda/(lambda+k),
  // otherwise to a uniform child. From the root of T (no extra root) the
  // walk always steps to a uniform child. Returns true on an upward move.
  bool step(Rng& rng);

  bool at_extra_root() const noexcept { return at_extra_; }
  std::size_t depth() const noexcept { return stack_.size() - 1; }
  std::uint32_t child_count() const noexcept { return counts_.back(); }
  VertexId vertex() const { return VertexId(path_); }

 private:
  const LazyTree* tree_;
  double lambda_;
  bool extra_root_;
  bool at_extra_ = false;
  std::vector<Cursor> stack_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> path_;
};

enum class WalkStop { exited, step_budget, returned };
const char* to_string(WalkStop s) noexcept;

struct WalkConfig {
  double lambda = 1.0;
  std::size_t exit_level = 0;      // stop on first reaching this level (0 = off)
  std::uint64_t max_steps = 0;     // step budget (0 = off)
  bool extra_root = false;         // stop on reaching the extra root
  std::uint64_t stream = 0;
};

struct WalkOutcome {
  WalkStop stop = WalkStop::exited;
  VertexId exit_vertex;  // set when stop == exited
  std::uint64_t steps = 0;
};

// Runs one walk from the root. Throws invalid_input when neither a level nor
// a step budget bounds it.
WalkOutcome run_walk(const LazyTree& tree, const WalkConfig& config, Rng& rng);

struct HarmonicOptions {
  std::size_t extra_levels = 30;       // walks run to level L + extra_levels
  std::uint64_t max_steps = 10'000'000;
  unsigned workers = 1;
  std::size_t bound_samples = 64;      // exit vertices used for the leak bound
};

struct HarmonicEstimate {
  std::vector<VertexId> cells;         // depth-L ancestors seen, lexicographic
  std::vector<std::uint64_t> counts;
  std::vector<double> frequency;       // counts / completed walks
  std::vector<double> std_error;       // binomial standard errors
  std::uint64_t n = 0, completed = 0;
  double stopped_fraction = 0.0;
  // Largest, over sampled exit vertices x at level L', of the probability
  // of climbing back to the depth-L ancestor with only T(x) as escape route.
  double leak_bound = 0.0;
  std::uint64_t seed = 0;

  double frequency_of(const VertexId& cell) const;
};

// Empirical HARM of the depth-L cylinders. Walk i uses stream i of `seed`.
HarmonicEstimate mc_harmonic(ElectricNetwork& net, std::size_t L, std::uint64_t n_walks,
                             std::uint64_t seed, const HarmonicOptions& options = {});

struct EscapeOptions {
  std::size_t escape_level = 30;       // reaching this level counts as escape
  std::uint64_t max_steps = 10'000'000;
  unsigned workers = 1;
  double censor_warning = 0.05;
};

struct EscapeEstimate {
  double estimate = 0.0;  // escaped / (escaped + returned)
  double std_error = 0.0;
  std::uint64_t n = 0, escaped = 0, returned = 0, censored = 0;
  double censored_fraction = 0.0;
  bool flagged = false;   // censored_fraction above the warning level
  std::uint64_t seed = 0;
};

// Monte Carlo alpha: walks from o on the tree with an extra root above o.
EscapeEstimate mc_escape(const LazyTree& tree, double lambda, std::uint64_t n_walks,
                         std::uint64_t seed, const EscapeOptions& options = {});

// {"estimate","stderr","n","censored_fraction","seed"}
std::string escape_json(const EscapeEstimate& e);
std::string harmonic_json(const HarmonicEstimate& h);

}  // namespace gwheat
