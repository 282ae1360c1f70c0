#include "gwheat/walk.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "gwheat/error.hpp"
#include "gwheat/parallel.hpp"

namespace gwheat {

Walker::Walker(const LazyTree& tree, double lambda, bool extra_root)
    : tree_(&tree), lambda_(lambda), extra_root_(extra_root) {
  if (!(lambda > 0.0)) fail(ErrorCode::invalid_input, "lambda must be positive");
  stack_.push_back(tree.root_cursor());
  counts_.push_back(tree.child_count(stack_.back()));
}

bool Walker::step(Rng& rng) {
  if (at_extra_) {
    at_extra_ = false;
    return false;
  }
  const std::uint32_t k = counts_.back();
  const bool has_parent = stack_.size() > 1 || extra_root_;
  const double u = uniform01(rng);
  std::uint32_t pick;
  if (has_parent) {
    const double x = u * (lambda_ + k);
    if (x < lambda_) {
      if (stack_.size() == 1) {
        at_extra_ = true;
      } else {
        stack_.pop_back();
        counts_.pop_back();
        path_.pop_back();
      }
      return true;
    }
    pick = static_cast<std::uint32_t>(x - lambda_);
  } else {
    pick = static_cast<std::uint32_t>(u * k);
  }
  pick = std::min(pick, k - 1) + 1;
  stack_.push_back(tree_->child(stack_.back(), pick));
  counts_.push_back(tree_->child_count(stack_.back()));
  path_.push_back(pick);
  return false;
}

const char* to_string(WalkStop s) noexcept {
  switch (s) {
    case WalkStop::exited: return "exited";
    case WalkStop::step_budget: return "step-budget";
    case WalkStop::returned: return "returned";
  }
  return "?";
}

WalkOutcome run_walk(const LazyTree& tree, const WalkConfig& config, Rng& rng) {
  if (config.exit_level < 1 && config.max_steps < 1)
    fail(ErrorCode::invalid_input, "a walk needs an exit level or a step budget");
  Walker w(tree, config.lambda, config.extra_root);
  WalkOutcome out;
  for (;;) {
    if (config.max_steps > 0 && out.steps >= config.max_steps) {
      out.stop = WalkStop::step_budget;
      return out;
    }
    w.step(rng);
    ++out.steps;
    if (w.at_extra_root()) {
      out.stop = WalkStop::returned;
      return out;
    }
    if (config.exit_level > 0 && w.depth() == config.exit_level) {
      out.stop = WalkStop::exited;
      out.exit_vertex = w.vertex();
      return out;
    }
  }
}

double HarmonicEstimate::frequency_of(const VertexId& cell) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), cell);
  return it != cells.end() && *it == cell ? frequency[it - cells.begin()] : 0.0;
}

namespace {

constexpr std::uint64_t kChunk = 1024;

std::size_t chunks_for(std::uint64_t n) { return static_cast<std::size_t>((n + kChunk - 1) / kChunk); }

}  // namespace

HarmonicEstimate mc_harmonic(ElectricNetwork& net, std::size_t L, std::uint64_t n_walks,
                             std::uint64_t seed, const HarmonicOptions& options) {
  if (L < 1) fail(ErrorCode::invalid_input, "cylinder depth must be >= 1");
  if (n_walks < 1) fail(ErrorCode::invalid_input, "need at least one walk");
  const LazyTree& tree = net.tree();
  WalkConfig cfg;
  cfg.lambda = net.lambda();
  cfg.exit_level = L + options.extra_levels;
  cfg.max_steps = options.max_steps;

  struct Part {
    std::map<VertexId, std::uint64_t> counts;
    std::uint64_t stopped = 0;
    std::vector<VertexId> exits;  // full exit vertices of the first walks
  };
  std::vector<Part> parts(chunks_for(n_walks));
  parallel_for(parts.size(), options.workers, [&](std::size_t c) {
    Part& part = parts[c];
    const std::uint64_t end = std::min<std::uint64_t>(n_walks, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      auto rng = make_rng(seed, i);
      const auto out = run_walk(tree, cfg, rng);
      if (out.stop != WalkStop::exited) {
        ++part.stopped;
        continue;
      }
      ++part.counts[out.exit_vertex.prefix(L)];
      if (i < options.bound_samples) part.exits.push_back(out.exit_vertex);
    }
  });

  HarmonicEstimate est;
  est.n = n_walks;
  est.seed = seed;
  std::map<VertexId, std::uint64_t> total;
  std::uint64_t stopped = 0;
  std::vector<VertexId> exits;
  for (const auto& p : parts) {
    for (const auto& [v, k] : p.counts) total[v] += k;
    stopped += p.stopped;
    exits.insert(exits.end(), p.exits.begin(), p.exits.end());
  }
  est.completed = n_walks - stopped;
  est.stopped_fraction = static_cast<double>(stopped) / static_cast<double>(n_walks);
  for (const auto& [v, k] : total) {
    est.cells.push_back(v);
    est.counts.push_back(k);
    const double f = static_cast<double>(k) / static_cast<double>(est.completed);
    est.frequency.push_back(f);
    est.std_error.push_back(std::sqrt(f * (1.0 - f) / static_cast<double>(est.completed)));
  }

  // Path resistance between levels L and L' in the original scale.
  const double lam = net.lambda();
  const std::size_t Lp = L + options.extra_levels;
  double path_r = 0.0;
  for (std::size_t n = L; n < Lp; ++n) path_r += std::pow(lam, static_cast<double>(n));
  for (const auto& x : exits) {
    const double below = std::pow(lam, static_cast<double>(Lp)) * net.resistance(x).hi();
    est.leak_bound = std::max(est.leak_bound, below / (below + path_r));
  }
  return est;
}

EscapeEstimate mc_escape(const LazyTree& tree, double lambda, std::uint64_t n_walks,
                         std::uint64_t seed, const EscapeOptions& options) {
  require_transient(tree, lambda);
  if (n_walks < 1) fail(ErrorCode::invalid_input, "need at least one walk");
  WalkConfig cfg;
  cfg.lambda = lambda;
  cfg.exit_level = options.escape_level;
  cfg.max_steps = options.max_steps;
  cfg.extra_root = true;

  struct Part {
    std::uint64_t escaped = 0, returned = 0, censored = 0;
  };
  std::vector<Part> parts(chunks_for(n_walks));
  parallel_for(parts.size(), options.workers, [&](std::size_t c) {
    Part& part = parts[c];
    const std::uint64_t end = std::min<std::uint64_t>(n_walks, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      auto rng = make_rng(seed, i);
      switch (run_walk(tree, cfg, rng).stop) {
        case WalkStop::exited: ++part.escaped; break;
        case WalkStop::returned: ++part.returned; break;
        case WalkStop::step_budget: ++part.censored; break;
      }
    }
  });

  EscapeEstimate est;
  est.n = n_walks;
  est.seed = seed;
  for (const auto& p : parts) {
    est.escaped += p.escaped;
    est.returned += p.returned;
    est.censored += p.censored;
  }
  const double decided = static_cast<double>(est.escaped + est.returned);
  if (decided > 0) {
    est.estimate = static_cast<double>(est.escaped) / decided;
    est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / decided);
  }
  est.censored_fraction = static_cast<double>(est.censored) / static_cast<double>(n_walks);
  est.flagged = est.censored_fraction > options.censor_warning;
  return est;
}

std::string escape_json(const EscapeEstimate& e) {
  nlohmann::ordered_json j;
  j["estimate"] = e.estimate;
  j["stderr"] = e.std_error;
  j["n"] = e.n;
  j["censored_fraction"] = e.censored_fraction;
  j["seed"] = e.seed;
  return j.dump();
}

std::string harmonic_json(const HarmonicEstimate& h) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < h.cells.size(); ++i) {
    nlohmann::ordered_json c;
    c["cell"] = std::vector<std::uint32_t>(h.cells[i].path().begin(), h.cells[i].path().end());
    c["estimate"] = h.frequency[i];
    c["stderr"] = h.std_error[i];
    cells.push_back(c);
  }
  nlohmann::ordered_json j;
  j["cells"] = cells;
  j["n"] = h.n;
  j["censored_fraction"] = h.stopped_fraction;
  j["leak_bound"] = h.leak_bound;
  j["seed"] = h.seed;
  return j.dump();
}

}  // namespace gwheat
