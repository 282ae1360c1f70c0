#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "gwheat/cli.hpp"
#include "gwheat/error.hpp"

using namespace gwheat;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "gwheat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("gwheat_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("config text: comments, blanks and validation") {
  const auto m = cli::parse_config_text("# header\n\nlambda = 0.5  # inline\noffspring=pmf:2=1\r\n");
  CHECK(m.at("lambda") == "0.5");
  CHECK(m.at("offspring") == "pmf:2=1");
  CHECK_THROWS_AS(cli::parse_config_text("lambda 0.5\n"), Error);
  CHECK_THROWS_AS(cli::parse_config_text("lamda=0.5\n"), Error);
}

TEST_CASE("config values are validated") {
  CHECK_THROWS_AS(cli::make_config({{"lambda", "abc"}}), Error);
  CHECK_THROWS_AS(cli::make_config({{"lambda", "-1"}}), Error);
  CHECK_THROWS_AS(cli::make_config({{"tmin", "1"}, {"tmax", "0.5"}}), Error);
  CHECK_THROWS_AS(cli::make_config({{"tpoints", "1"}}), Error);
  CHECK_THROWS_AS(cli::make_config({{"offspring", "pmf:1=1"}}), Error);
  const auto c = cli::make_config({{"gamma", "0.5, 2"}, {"tmin", "1e-4"}, {"tmax", "1"}, {"tpoints", "5"}});
  CHECK(c.gamma == std::vector<double>{0.5, 2.0});
  const auto t = cli::time_grid(c);
  REQUIRE(t.size() == 5u);
  CHECK(t.front() == 1e-4);
  CHECK(t.back() == 1.0);
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
}

TEST_CASE("config hash ignores output location and worker count") {
  auto a = cli::make_config({{"lambda", "1"}, {"out", "x"}, {"workers", "1"}});
  auto b = cli::make_config({{"lambda", "1"}, {"out", "y"}, {"workers", "4"}});
  auto c = cli::make_config({{"lambda", "1.1"}});
  CHECK(cli::config_hash(a) == cli::config_hash(b));
  CHECK(cli::config_hash(a) != cli::config_hash(c));
}

TEST_CASE("missing lambda exits 2 naming the key") {
  const auto dir = scratch("missing");
  const auto r = run({"ray", "--offspring", "pmf:2=1", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("'lambda'") != std::string::npos);
}

TEST_CASE("validation errors exit 2") {
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"ray", "--lambda", "x"}).code == 2);
  const auto dir = scratch("nontransient");
  const auto r = run({"ray", "--offspring", "pmf:1=0.5,2=0.5", "--lambda", "1.5", "--out",
                      dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("not_transient") != std::string::npos);
  CHECK(run({"ray", "--config", (dir / "absent.cfg").string()}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("flags override the config file") {
  const auto dir = scratch("override");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "offspring = pmf:2=1\nlambda = 3\nlevels = 10\nout = " << (dir / "a").string() << '\n';
  }
  CHECK(run({"ray", "--config", (dir / "run.cfg").string()}).code == 2);  // lambda >= m
  const auto r = run({"ray", "--config", (dir / "run.cfg").string(), "--lambda", "1"});
  REQUIRE(r.code == 0);
  const auto m = load_json(dir / "a" / "ray.manifest.json");
  CHECK(m["config"]["lambda"] == "1");
  CHECK(m["config"]["levels"] == "10");
  CHECK(m["seed"] == 1);
  CHECK(m["exit_code"] == 0);
  CHECK(m.contains("version"));
  CHECK(m["wall_time_s"].get<double>() >= 0.0);
  CHECK(m["outputs"] == nlohmann::json::array({"ray.csv"}));
}

TEST_CASE("beta on the binary tree reports log 2 with zero stderr") {
  const auto dir = scratch("beta");
  const auto r = run({"beta", "--offspring", "pmf:2=1", "--lambda", "1", "--outer", "20",
                      "--inner", "5", "--replicates", "4", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = load_json(dir / "beta.json");
  CHECK(j["estimator"] == "beta_ray");
  CHECK(j["value"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(j["stderr"].get<double>() == 0.0);
  CHECK(j["replicates"] == 4);
  CHECK(j["targets"]["kappa"].get<double>() == doctest::Approx(1.0));
  const auto s = load_json(dir / "beta_stationary.json");
  CHECK(s["value"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("verify on the binary tree passes every check") {
  const auto dir = scratch("verify");
  const auto r = run({"verify", "--offspring", "pmf:2=1", "--lambda", "1", "--out", dir.string()});
  CHECK(r.code == 0);
  const auto j = load_json(dir / "verify.json");
  CHECK(j["pass"] == true);
  for (const auto& c : j["checks"]) {
    CAPTURE(c["name"].get<std::string>());
    CHECK(c["pass"] == true);
  }
  CHECK(j["checks"][1]["name"] == "mass_defect");
  CHECK(j["checks"][1]["value"].get<double>() <= 1e-8);
  CHECK(j["checks"][2]["value"].get<double>() <= 1e-6);
  CHECK(j["vd"]["el_witness"].is_null());
}

TEST_CASE("an unresolved grid exits 3 after writing its output") {
  const auto dir = scratch("short");
  const auto r = run({"heat-diag", "--offspring", "pmf:2=1", "--lambda", "1", "--levels", "5",
                      "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(fs::exists(dir / "heat_diag.csv"));
  CHECK(load_json(dir / "heat-diag.manifest.json")["exit_code"] == 3);
  const auto d = run({"displacement", "--offspring", "pmf:2=1", "--lambda", "1", "--levels", "5",
                      "--out", dir.string()});
  CHECK(d.code == 3);
}

TEST_CASE("outputs embed the config hash and reruns are identical") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const std::vector<std::string> base = {"--offspring", "pmf:1=0.5,2=0.5", "--lambda", "0.8",
                                         "--gap", "1e-4", "--levels", "40", "--depth", "6",
                                         "--tpoints", "8", "--tmin", "1e-4", "--walks", "2000", "--gamma", "2"};
  for (const std::string cmd : {"gen-tree", "resistance", "harmonic", "ray", "heat-diag", "heat-offdiag",
                          "displacement", "xt-sample", "walk-oracle"}) {
    CAPTURE(cmd);
    auto args = base;
    args.insert(args.begin(), cmd);
    auto one = args, two = args;
    one.insert(one.end(), {"--out", a.string()});
    two.insert(two.end(), {"--out", b.string(), "--workers", "2"});
    CHECK(run(one).code == 0);
    CHECK(run(two).code == 0);
  }
  const auto hash = cli::config_hash(cli::make_config({{"offspring", "pmf:1=0.5,2=0.5"},
                                                        {"lambda", "0.8"}, {"gap", "1e-4"},
                                                        {"levels", "40"}, {"depth", "6"},
                                                        {"tpoints", "8"}, {"tmin", "1e-4"},
                                                        {"walks", "2000"}, {"gamma", "2"}}));
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename().string();
    if (name.find("manifest") != std::string::npos) continue;
    CAPTURE(name);
    const auto text = slurp(entry.path());
    CHECK(text.find(hash) != std::string::npos);
    CHECK(text == slurp(b / name));
    CHECK(text.find('\r') == std::string::npos);
  }
}
