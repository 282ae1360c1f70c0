#include "gwheat/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gwheat/boundary.hpp"
#include "gwheat/error.hpp"
#include "gwheat/estimators.hpp"
#include "gwheat/heat.hpp"
#include "gwheat/io.hpp"
#include "gwheat/walk.hpp"

#ifndef GWHEAT_VERSION
#define GWHEAT_VERSION "dev"
#endif

namespace gwheat::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct KeyInfo {
  const char* name;
  const char* help;
  bool hashed;
};

const std::vector<KeyInfo>& key_table() {
  static const std::vector<KeyInfo> keys = {
      {"offspring", "offspring law, e.g. pmf:1=0.5,2=0.5 or geom:0.4", true},
      {"lambda", "bias parameter (0 < lambda < m)", true},
      {"seed", "master seed", true},
      {"depth", "tree depth / cell level", true},
      {"gap", "resistance target gap on log r", true},
      {"max_depth", "deepest level expanded below a vertex", true},
      {"budget", "resistance visits per vertex", true},
      {"shell_tol", "relative tolerance of moment series", true},
      {"levels", "ray levels", true},
      {"replicates", "independent replicates", true},
      {"outer", "outer trees of the stationary estimator", true},
      {"inner", "escape-probability pool of the stationary estimator", true},
      {"tmin", "smallest time of the log grid", true},
      {"tmax", "largest time of the log grid", true},
      {"tpoints", "points of the log grid", true},
      {"gamma", "comma-separated moment orders", true},
      {"meet_level", "meeting level of the off-diagonal kernel", true},
      {"cell_level", "cylinder depth of the walk oracle", true},
      {"walks", "walks for the Monte Carlo oracle", true},
      {"mass_t", "time of the mass check in verify", true},
      {"ck_t", "time t = s of the Chapman-Kolmogorov check in verify", true},
      {"out", "output directory", false},
      {"workers", "worker threads (0 = all cores)", false},
  };
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool known_key(const std::string& k) {
  for (const auto& info : key_table())
    if (k == info.name) return true;
  return false;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || !std::isfinite(x))
    fail(ErrorCode::invalid_input, "invalid number for '" + key + "': '" + v + "'");
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end)
    fail(ErrorCode::invalid_input, "invalid integer for '" + key + "': '" + v + "'");
  return x;
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::invalid_input, what);
}

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += format_double(xs[i]);
  }
  return s;
}

std::map<std::string, std::string> as_strings(const RunConfig& c) {
  std::map<std::string, std::string> m;
  m["offspring"] = c.offspring;
  m["lambda"] = c.lambda ? format_double(*c.lambda) : "";
  m["seed"] = std::to_string(c.seed);
  m["depth"] = std::to_string(c.depth);
  m["gap"] = format_double(c.gap);
  m["max_depth"] = std::to_string(c.max_depth);
  m["budget"] = std::to_string(c.budget);
  m["shell_tol"] = format_double(c.shell_tol);
  m["levels"] = std::to_string(c.levels);
  m["replicates"] = std::to_string(c.replicates);
  m["outer"] = std::to_string(c.outer);
  m["inner"] = std::to_string(c.inner);
  m["tmin"] = format_double(c.tmin);
  m["tmax"] = format_double(c.tmax);
  m["tpoints"] = std::to_string(c.tpoints);
  m["gamma"] = join(c.gamma);
  m["meet_level"] = std::to_string(c.meet_level);
  m["cell_level"] = std::to_string(c.cell_level);
  m["walks"] = std::to_string(c.walks);
  m["mass_t"] = format_double(c.mass_t);
  m["ck_t"] = format_double(c.ck_t);
  m["out"] = c.out;
  m["workers"] = std::to_string(c.workers);
  return m;
}

// ---------------------------------------------------------------------------

class Run {
 public:
  Run(std::string command, RunConfig config, std::ostream& out)
      : command_(std::move(command)), c_(std::move(config)), out_(out),
        hash_(config_hash(c_)), dir_(c_.out) {
    fs::create_directories(dir_);
  }

  const RunConfig& config() const { return c_; }
  const std::string& hash() const { return hash_; }
  std::ostream& log() { return out_; }

  std::ofstream open(const std::string& name) {
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorCode::invalid_input, "cannot write " + (dir_ / name).string());
    files_.push_back(name);
    out_ << "wrote " << (dir_ / name).string() << '\n';
    return os;
  }

  void write_json(const std::string& name, const ojson& j) {
    auto os = open(name);
    os << j.dump(2) << '\n';
  }

  void manifest(int exit_code, double wall_seconds) {
    ojson cfg;
    const auto strings = as_strings(c_);
    for (const auto& k : config_keys()) cfg[k] = strings.at(k);
    ojson m;
    m["command"] = command_;
    m["config"] = cfg;
    m["config_hash"] = hash_;
    m["seed"] = c_.seed;
    m["version"] = GWHEAT_VERSION;
    m["wall_time_s"] = wall_seconds;
    m["exit_code"] = exit_code;
    m["outputs"] = files_;
    std::ofstream os(dir_ / (command_ + ".manifest.json"), std::ios::binary | std::ios::trunc);
    os << m.dump(2) << '\n';
  }

  OffspringDistribution dist() const {
    require(!c_.offspring.empty(), "missing required key 'offspring'");
    return parse_offspring(c_.offspring);
  }

  double lambda(const OffspringDistribution& d) const {
    require(c_.lambda.has_value(), "missing required key 'lambda'");
    if (!(*c_.lambda < d.mean()))
      fail(ErrorCode::not_transient, "lambda = " + format_double(*c_.lambda) +
                                         " is not below the mean offspring m = " +
                                         format_double(d.mean()));
    return *c_.lambda;
  }

  ResistancePolicy policy() const {
    ResistancePolicy p;
    p.target_gap = c_.gap;
    p.max_depth = c_.max_depth;
    p.visit_budget = c_.budget;
    return p;
  }

  ReplicateOptions replicate() const { return {policy(), c_.workers}; }

 private:
  std::string command_;
  RunConfig c_;
  std::ostream& out_;
  std::string hash_;
  fs::path dir_;
  std::vector<std::string> files_;
};

// Everything a boundary-process command needs: the tree, its network and a
// HARM ray drawn with stream 1.
struct Setup {
  OffspringDistribution dist;
  double lambda;
  LazyTree tree;
  ElectricNetwork net;

  explicit Setup(const Run& run)
      : dist(run.dist()), lambda(run.lambda(dist)), tree(dist, run.config().seed),
        net(tree, lambda, run.policy()) {}

  RayProfile ray(std::size_t levels) {
    auto rng = make_rng(tree.seed(), 1);
    return sample_ray(net, levels, rng);
  }
};

ojson fit_json(const CurveFit& c) {
  ojson j;
  j["slope"] = c.fit.slope;
  j["intercept"] = c.fit.intercept;
  j["r2"] = c.fit.r2;
  j["target"] = c.target;
  j["points"] = c.fit.points;
  j["window"] = {c.fit.window_lo, c.fit.window_hi};
  j["trimmed_small_t"] = c.trimmed_small;
  j["trimmed_large_t"] = c.trimmed_large;
  return j;
}

// ---------------------------------------------------------------------------

int cmd_gen_tree(Run& run) {
  LazyTree tree(run.dist(), run.config().seed);
  const auto ft = truncate(tree, run.config().depth);
  auto os = run.open("tree.jsonl");
  write_tree_dump(os, ft, run.hash());
  run.log() << "vertices " << ft.vertex_count() << " to depth " << ft.depth << '\n';
  return 0;
}

int cmd_resistance(Run& run) {
  Setup s(run);
  const std::size_t depth = run.config().depth;
  s.net.prefetch(s.tree.root(), depth);
  auto os = run.open("resistance.csv");
  write_resistance_csv_header(os, run.hash());
  std::vector<NodeId> level{s.tree.root()};
  for (std::size_t h = 0; h <= depth && !level.empty(); ++h) {
    std::vector<NodeId> next;
    for (NodeId x : level) {
      write_resistance_csv_row(os, s.tree.path(x), s.net.resistance(x));
      if (h < depth)
        for (std::uint32_t i = 1; i <= s.tree.child_count(x); ++i) next.push_back(s.tree.child(x, i));
    }
    level = std::move(next);
  }
  const auto r = s.net.resistance(s.tree.root());
  run.log() << "r(root) in [" << format_double(r.lo()) << ", " << format_double(r.hi())
            << "]\n";
  if (s.net.warning_count() > 0)
    run.log() << s.net.warning_count() << " vertices stopped before the gap target\n";
  return 0;
}

int cmd_harmonic(Run& run) {
  Setup s(run);
  const auto cells = cells_at_depth(s.net, run.config().depth);
  auto os = run.open("harmonic.csv");
  os << "# config_hash=" << run.hash() << "\ncell,log_H,H\n";
  for (const auto& c : cells)
    os << '"' << c.vertex.to_string() << "\"," << format_double(c.log_H) << ','
       << format_double(std::exp(c.log_H)) << '\n';
  run.log() << cells.size() << " cells at depth " << run.config().depth << '\n';
  return 0;
}

int cmd_ray(Run& run) {
  Setup s(run);
  const auto p = s.ray(run.config().levels);
  auto os = run.open("ray.csv");
  write_profile_csv(os, p, run.hash());
  run.log() << "log D_L / -L = " << format_double(p.log_D.back() / -double(p.levels())) << '\n';
  return 0;
}

int cmd_beta(Run& run) {
  const auto& c = run.config();
  const auto dist = run.dist();
  const double lambda = run.lambda(dist);
  const auto ray = estimate_beta_ray(dist, lambda, c.levels, c.replicates, c.seed, run.replicate());
  const auto st = beta_stationary(dist, lambda, c.outer, c.inner, c.seed, run.replicate());
  std::optional<ExponentTargets> targets;
  if (ray.value > std::log(lambda)) targets = ExponentTargets::make(ray.value, lambda);
  {
    auto os = run.open("beta.json");
    os << estimate_json("beta_ray", ray, targets, c.seed, run.hash()) << '\n';
  }
  {
    auto os = run.open("beta_stationary.json");
    os << estimate_json("beta_stationary", st.beta, targets, c.seed, run.hash()) << '\n';
  }
  const double sd = std::hypot(ray.std_error, st.beta.std_error);
  run.log() << "beta_ray " << format_double(ray.value) << " +- " << format_double(ray.std_error)
            << "\nbeta_stationary " << format_double(st.beta.value) << " +- "
            << format_double(st.beta.std_error) << "\nlog m " << format_double(std::log(dist.mean()))
            << '\n';
  if (st.flagged > 0) run.log() << st.flagged << " trees met a nonpositive weight denominator\n";
  if (sd > 0.0 && std::abs(ray.value - st.beta.value) > 3 * sd) {
    run.log() << "estimators disagree by more than 3 combined stderr\n";
    return 3;
  }
  return 0;
}

int cmd_heat_diag(Run& run) {
  Setup s(run);
  const auto p = s.ray(run.config().levels);
  const auto t = time_grid(run.config());
  const auto v = p_diag_curve(p, t);
  auto os = run.open("heat_diag.csv");
  write_kernel_csv(os, t, v, run.hash());
  std::size_t bad = 0;
  for (const auto& k : v) bad += !k.converged;
  if (bad > 0) {
    run.log() << bad << " grid points unresolved; levels needed for t = "
              << format_double(t.front()) << ": " << diag_levels_needed(p, t.front()) << '\n';
    return 3;
  }
  return 0;
}

int cmd_heat_offdiag(Run& run) {
  Setup s(run);
  const auto p = s.ray(run.config().levels);
  const auto t = time_grid(run.config());
  const auto v = p_offdiag_curve(p, run.config().meet_level, t);
  auto os = run.open("heat_offdiag.csv");
  write_kernel_csv(os, t, v, run.hash());
  return 0;
}

int cmd_displacement(Run& run) {
  Setup s(run);
  const auto& c = run.config();
  const auto p = s.ray(c.levels);
  const auto t = time_grid(c);
  auto os = run.open("displacement.csv");
  os << "# config_hash=" << run.hash() << "\nt,gamma,metric,value,error_bound\n";
  std::size_t bad = 0;
  for (double g : c.gamma)
    for (Metric m : {Metric::d, Metric::D})
      for (double ti : t) {
        os << format_double(ti) << ',' << format_double(g) << ',' << to_string(m) << ',';
        try {
          const auto mv = moments(p, ti, g, m, c.shell_tol);
          os << format_double(mv.value) << ',' << format_double(mv.error_bound) << '\n';
        } catch (const Error& e) {
          if (e.code() != ErrorCode::under_resolved) throw;
          os << ",\n";
          ++bad;
        }
      }
  if (bad > 0) {
    run.log() << bad << " moments unresolved by the profile (empty rows)\n";
    return 3;
  }
  return 0;
}

int cmd_exponents(Run& run) {
  Setup s(run);
  const auto& c = run.config();
  const auto beta = estimate_beta_ray(s.dist, s.lambda, c.levels, c.replicates, c.seed,
                                      run.replicate());
  const auto targets = ExponentTargets::make(beta.value, s.lambda);
  const auto res = estimate_resistance_exponent(s.dist, s.lambda, c.levels, c.replicates, c.seed,
                                                run.replicate());
  const auto p = s.ray(c.levels);
  const auto t = time_grid(c);
  ScanOptions opt;
  opt.meet_level = c.meet_level;
  opt.moment_rel_tol = c.shell_tol;
  const auto heat = heat_exponent_scan(p, t, targets, opt);
  const auto disp = displacement_scan(p, c.gamma, t, targets, opt);
  std::vector<double> trace;
  for (std::size_t n = 1; n <= p.levels(); ++n) trace.push_back(p.log_D[n] / -double(n));

  ojson j;
  j["config_hash"] = run.hash();
  j["seed"] = c.seed;
  j["beta"] = ojson::parse(estimate_json("beta_ray", beta, targets, c.seed, run.hash()));
  j["resistance_exponent"] =
      ojson::parse(estimate_json("resistance_exponent", res, targets, c.seed, run.hash()));
  j["resistance_exponent"]["target"] = targets.log_lambda;
  j["heat"] = {{"diagonal", fit_json(heat.diagonal)},
               {"offdiagonal", fit_json(heat.offdiagonal)},
               {"meet_level", heat.meet_level}};
  ojson d = ojson::array();
  for (const auto& f : disp) {
    auto e = fit_json(f.curve);
    e["gamma"] = f.gamma;
    e["metric"] = to_string(f.metric);
    d.push_back(e);
  }
  j["displacement"] = d;
  j["ratio_trace"] = {{"target", targets.beta - targets.log_lambda}, {"values", trace}};
  run.write_json("exponents.json", j);
  run.log() << "beta " << format_double(beta.value) << " kappa " << format_double(targets.kappa())
            << "\ndiagonal slope " << format_double(heat.diagonal.fit.slope) << " (target "
            << format_double(heat.diagonal.target) << ")\noff-diagonal slope "
            << format_double(heat.offdiagonal.fit.slope) << '\n';
  return 0;
}

int cmd_walk_oracle(Run& run) {
  Setup s(run);
  const auto& c = run.config();
  HarmonicOptions hopt;
  hopt.workers = c.workers;
  const auto h = mc_harmonic(s.net, c.cell_level, c.walks, c.seed, hopt);
  const auto cells = cells_at_depth(s.net, c.cell_level);
  double worst = 0.0;
  ojson rows = ojson::array();
  for (const auto& cell : cells) {
    const double p = std::exp(cell.log_H);
    const double f = h.frequency_of(cell.vertex);
    const double sd = std::sqrt(p * (1 - p) / double(std::max<std::uint64_t>(h.completed, 1)));
    const double z = sd > 0.0 ? std::abs(f - p) / sd : (f == p ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    rows.push_back({{"cell", cell.vertex.to_string()}, {"flow", p}, {"estimate", f}, {"z", z}});
  }
  EscapeOptions eopt;
  eopt.workers = c.workers;
  const auto e = mc_escape(s.tree, s.lambda, c.walks, derive_seed(c.seed, 1), eopt);
  const auto r = s.net.resistance(s.tree.root());
  const double a_lo = escape_probability(r.hi(), s.lambda);
  const double a_hi = escape_probability(r.lo(), s.lambda);
  const bool escape_ok =
      e.estimate >= a_lo - 3 * e.std_error && e.estimate <= a_hi + 3 * e.std_error;
  const bool pass = worst <= 4.0 && escape_ok && h.stopped_fraction == 0.0;

  ojson j;
  j["config_hash"] = run.hash();
  j["harmonic"] = ojson::parse(harmonic_json(h));
  j["comparison"] = rows;
  j["max_z"] = worst;
  j["escape"] = ojson::parse(escape_json(e));
  j["escape_target"] = {a_lo, a_hi};
  j["pass"] = pass;
  run.write_json("walk_oracle.json", j);
  run.log() << "max |z| over " << cells.size() << " cells: " << format_double(worst)
            << "\nescape " << format_double(e.estimate) << " vs [" << format_double(a_lo) << ", "
            << format_double(a_hi) << "]\n";
  if (e.flagged) run.log() << "escape walks censored: " << format_double(e.censored_fraction) << '\n';
  return pass ? 0 : 3;
}

int cmd_xt_sample(Run& run) {
  Setup s(run);
  const auto p = s.ray(run.config().levels);
  const auto t = time_grid(run.config());
  auto rng = make_rng(run.config().seed, 2);
  const auto path = sample_trajectory(s.net, p, t, rng);
  auto os = run.open("trajectory.jsonl");
  write_trajectory_jsonl(os, path, run.hash());
  return 0;
}

int cmd_verify(Run& run) {
  Setup s(run);
  const auto& c = run.config();
  const auto p = s.ray(c.levels);
  const auto t = time_grid(c);
  const double mass_threshold = s.dist.degenerate() ? 1e-8 : 1e-6;
  ojson checks = ojson::array();
  bool all = true;

  auto check = [&](const std::string& name, double threshold,
                   const std::function<double(ojson&)>& body) {
    ojson row;
    row["name"] = name;
    row["threshold"] = threshold;
    try {
      const double v = body(row);
      row["value"] = v;
      row["pass"] = v <= threshold;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::under_resolved && e.code() != ErrorCode::numerical) throw;
      row["value"] = nullptr;
      row["pass"] = false;
      row["note"] = std::string(to_string(e.code())) + ": " + e.what();
    }
    all = all && row["pass"].get<bool>();
    run.log() << (row["pass"].get<bool>() ? "PASS " : "FAIL ") << name << '\n';
    checks.push_back(row);
  };

  check("profile_monotone", 0.0, [&](ojson&) {
    check_profile(p);
    return 0.0;
  });
  check("mass_defect", mass_threshold, [&](ojson& row) {
    const auto m = verify_mass(s.net, p, c.mass_t, c.depth);
    row["cells"] = m.cells;
    row["own_cell_share"] = m.own_cell_share;
    return m.defect;
  });
  check("chapman_kolmogorov", 1e-6, [&](ojson& row) {
    std::size_t n = 0;
    while (n < c.depth && n < p.levels() && p.branching[n] < 2) ++n;
    if (n >= c.depth || n >= p.levels())
      fail(ErrorCode::under_resolved, "no branching vertex above the cell level");
    auto rng = make_rng(c.seed, 3);
    const auto eta = resample_below(s.net, p, n, p.levels(), rng);
    const auto ck = verify_ck(s.net, p, eta, c.ck_t, c.ck_t, c.depth);
    row["cells"] = ck.cells;
    row["meet_level"] = n;
    return ck.rel_error;
  });
  check("kernel_bound_violations", 0.0, [&](ojson& row) {
    const auto b = check_kernel_bounds(p, t);
    row["lower_checked"] = b.lower_checked;
    row["upper_checked"] = b.upper_checked;
    row["worst_lower_ratio"] = b.worst_lower_ratio;
    row["worst_upper_ratio"] = b.worst_upper_ratio;
    return double(b.lower_violations + b.upper_violations);
  });

  const auto vd = vd_diagnostic(s.tree, std::min<std::size_t>(c.depth, 6));
  ojson j;
  j["config_hash"] = run.hash();
  j["checks"] = checks;
  j["vd"] = {{"el_witness", vd.el_witness ? ojson(vd.el_witness->to_string()) : ojson(nullptr)},
             {"max_branching", vd.max_branching},
             {"depth_scanned", vd.depth_scanned}};
  j["pass"] = all;
  run.write_json("verify.json", j);
  return all ? 0 : 3;
}

using Command = int (*)(Run&);

struct CommandInfo {
  const char* name;
  const char* help;
  Command fn;
};

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"gen-tree", "dump the tree to --depth as JSON lines", cmd_gen_tree},
      {"resistance", "resistance intervals of every vertex to --depth", cmd_resistance},
      {"harmonic", "harmonic measure of the depth-L cylinders", cmd_harmonic},
      {"ray", "sample a harmonic ray and its level profile", cmd_ray},
      {"beta", "ray and stationary estimates of beta", cmd_beta},
      {"heat-diag", "on-diagonal heat kernel along a sampled ray", cmd_heat_diag},
      {"heat-offdiag", "off-diagonal heat kernel at --meet-level", cmd_heat_offdiag},
      {"displacement", "displacement moments in d and D", cmd_displacement},
      {"exponents", "fitted heat and displacement exponents vs targets", cmd_exponents},
      {"walk-oracle", "Monte Carlo exit law and escape probability", cmd_walk_oracle},
      {"xt-sample", "sample the boundary process on the time grid", cmd_xt_sample},
      {"verify", "mass, Chapman-Kolmogorov and kernel bound checks", cmd_verify},
  };
  return list;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input:
    case ErrorCode::not_transient: return 2;
    case ErrorCode::under_resolved:
    case ErrorCode::numerical:
    case ErrorCode::resource_limit: return 3;
    case ErrorCode::internal: return 1;
  }
  return 1;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::invalid_input, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& info : key_table()) k.emplace_back(info.name);
    return k;
  }();
  return keys;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::invalid_input, "config line " + std::to_string(n) + ": expected key=value");
    const auto key = trim(std::string_view(body).substr(0, eq));
    if (!known_key(key))
      fail(ErrorCode::invalid_input, "config line " + std::to_string(n) + ": unknown key '" +
                                         key + "'");
    out[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return out;
}

RunConfig make_config(const std::map<std::string, std::string>& raw) {
  RunConfig c;
  for (const auto& [k, v] : raw) {
    if (k == "offspring") {
      c.offspring = v;
      if (!v.empty()) parse_offspring(v);
    } else if (k == "lambda") {
      if (!v.empty()) c.lambda = to_double(k, v);
    } else if (k == "seed") {
      c.seed = to_uint(k, v);
    } else if (k == "depth") {
      c.depth = to_uint(k, v);
    } else if (k == "gap") {
      c.gap = to_double(k, v);
    } else if (k == "max_depth") {
      c.max_depth = static_cast<std::uint32_t>(to_uint(k, v));
    } else if (k == "budget") {
      c.budget = to_uint(k, v);
    } else if (k == "shell_tol") {
      c.shell_tol = to_double(k, v);
    } else if (k == "levels") {
      c.levels = to_uint(k, v);
    } else if (k == "replicates") {
      c.replicates = to_uint(k, v);
    } else if (k == "outer") {
      c.outer = to_uint(k, v);
    } else if (k == "inner") {
      c.inner = to_uint(k, v);
    } else if (k == "tmin") {
      c.tmin = to_double(k, v);
    } else if (k == "tmax") {
      c.tmax = to_double(k, v);
    } else if (k == "tpoints") {
      c.tpoints = to_uint(k, v);
    } else if (k == "gamma") {
      c.gamma.clear();
      std::istringstream is(v);
      std::string item;
      while (std::getline(is, item, ',')) c.gamma.push_back(to_double(k, trim(item)));
    } else if (k == "meet_level") {
      c.meet_level = to_uint(k, v);
    } else if (k == "cell_level") {
      c.cell_level = to_uint(k, v);
    } else if (k == "walks") {
      c.walks = to_uint(k, v);
    } else if (k == "mass_t") {
      c.mass_t = to_double(k, v);
    } else if (k == "ck_t") {
      c.ck_t = to_double(k, v);
    } else if (k == "out") {
      c.out = v;
    } else if (k == "workers") {
      c.workers = static_cast<unsigned>(to_uint(k, v));
    } else {
      fail(ErrorCode::invalid_input, "unknown key '" + k + "'");
    }
  }
  require(!c.lambda || *c.lambda > 0.0, "'lambda' must be positive");
  require(c.gap > 0.0, "'gap' must be positive");
  require(c.shell_tol > 0.0, "'shell_tol' must be positive");
  require(c.depth >= 1, "'depth' must be at least 1");
  require(c.levels >= 1, "'levels' must be at least 1");
  require(c.replicates >= 1, "'replicates' must be at least 1");
  require(c.outer >= 2, "'outer' must be at least 2");
  require(c.inner >= 1, "'inner' must be at least 1");
  require(c.tmin > 0.0 && c.tmin < c.tmax, "the time grid needs 0 < tmin < tmax");
  require(c.tpoints >= 2, "'tpoints' must be at least 2");
  require(!c.gamma.empty(), "'gamma' needs at least one value");
  for (double g : c.gamma) require(g > 0.0, "'gamma' values must be positive");
  require(c.cell_level >= 1, "'cell_level' must be at least 1");
  require(c.walks >= 1, "'walks' must be at least 1");
  require(c.mass_t > 0.0 && c.ck_t > 0.0, "'mass_t' and 'ck_t' must be positive");
  require(!c.out.empty(), "'out' must not be empty");
  return c;
}

std::string canonical_text(const RunConfig& c) {
  const auto strings = as_strings(c);
  std::string text;
  for (const auto& info : key_table())
    if (info.hashed) text += std::string(info.name) + '=' + strings.at(info.name) + '\n';
  return text;
}

std::string config_hash(const RunConfig& c) { return hash_text(canonical_text(c)); }

std::vector<double> time_grid(const RunConfig& c) {
  std::vector<double> t(c.tpoints);
  const double a = std::log(c.tmin), b = std::log(c.tmax);
  for (std::size_t i = 0; i < c.tpoints; ++i)
    t[i] = std::exp(a + (b - a) * double(i) / double(c.tpoints - 1));
  t.front() = c.tmin;
  t.back() = c.tmax;
  return t;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Heat kernels and biased walks on Galton-Watson trees"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& info : key_table()) {
    std::string names = std::string("--") + info.name;
    std::string dashed = info.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != info.name) names += ",--" + dashed;
    flag_options[info.name] = app.add_option(names, flag_values[info.name], info.help);
  }
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& cmd : commands()) subs.emplace_back(app.add_subcommand(cmd.name, cmd.help), cmd.fn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  std::optional<Run> current;
  const auto start = std::chrono::steady_clock::now();
  int code = 0;
  try {
    std::map<std::string, std::string> raw;
    if (!config_path.empty()) raw = parse_config_text(read_file(config_path));
    for (const auto& [key, opt] : flag_options)
      if (opt->count() > 0) raw[key] = flag_values[key];
    const RunConfig config = make_config(raw);
    for (const auto& [sub, fn] : subs) {
      if (!sub->parsed()) continue;
      current.emplace(sub->get_name(), config, out);
      code = fn(*current);
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.code()) << "]: " << e.what() << '\n';
    code = exit_code(e.code());
    if (code == 2) return code;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << '\n';
    code = 1;
  }
  if (current)
    current->manifest(code, std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                                .count());
  return code;
}

}  // namespace gwheat::cli
