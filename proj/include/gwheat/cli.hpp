#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gwheat::cli {

// Effective configuration of one run. Every key can come from the config
// file (key=value lines) or from a --key flag; flags win.
struct RunConfig {
  std::string offspring;
  std::optional<double> lambda;
  std::uint64_t seed = 1;
  std::size_t depth = 12;        // tree / cell depth for gen-tree, resistance, harmonic, verify
  double gap = 1e-6;             // resistance target gap (log scale)
  std::uint32_t max_depth = 1000;
  std::uint64_t budget = 10'000'000;  // resistance visits per vertex
  double shell_tol = 1e-6;       // relative tolerance of moment series
  std::size_t levels = 60;       // ray levels
  std::size_t replicates = 20;
  std::size_t outer = 2000;      // outer trees of the stationary estimator
  std::size_t inner = 200;       // alpha pool size of the stationary estimator
  double tmin = 1e-8, tmax = 1e-3;
  std::size_t tpoints = 40;
  std::vector<double> gamma{0.3, 1.0, 2.0};
  std::size_t meet_level = 1;    // off-diagonal kernel level
  std::size_t cell_level = 2;    // walk-oracle cylinder depth
  std::uint64_t walks = 100'000;
  double mass_t = 1.0;           // verify: mass check time
  double ck_t = 0.1;             // verify: Chapman-Kolmogorov times t = s
  std::string out = ".";
  unsigned workers = 1;
};

// Keys in the order used for hashing and manifests.
const std::vector<std::string>& config_keys();

// Reads key=value lines; '#' starts a comment. Throws invalid_input on
// malformed lines and unknown keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Builds and validates a config from raw key/value pairs.
RunConfig make_config(const std::map<std::string, std::string>& raw);

// Canonical key=value text of the result-affecting keys (not out/workers).
std::string canonical_text(const RunConfig& c);
std::string config_hash(const RunConfig& c);

// Log-spaced t grid from tmin to tmax.
std::vector<double> time_grid(const RunConfig& c);

// Full command-line entry point. Exit codes: 0 success, 2 validation error,
// 3 under-resolution or failed diagnostic, 1 unexpected failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gwheat::cli
