#include <functional>
#include <sstream>

#include "doctest.h"
#include "gwheat/error.hpp"
#include "support.hpp"

using namespace gwheat;

TEST_CASE("offspring parsing and means") {
  CHECK(parse_offspring("pmf:1=0.5,2=0.5").mean() == doctest::Approx(1.5).epsilon(1e-15));
  const auto g = parse_offspring("geom:0.5");
  CHECK(g.kind() == OffspringDistribution::Kind::shifted_geometric);
  CHECK(g.mean() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g.probability(3) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(parse_offspring("pmf:2=1").degenerate() == 2u);

  for (const char* bad : {"pmf:0=0.2,2=0.8", "pmf:1=1", "pmf:1=0.5,2=0.4", "pmf:1=-0.5,2=1.5",
                          "pmf:2=0", "pmf:2=1,2=0", "pmf:1=0.9,2=0.1x", "geom:1", "geom:0",
                          "normal:1", "pmf:"}) {
    CAPTURE(std::string(bad));
    CHECK_THROWS_AS(parse_offspring(bad), Error);
  }
  // mean exactly 1 is rejected (not supercritical)
  CHECK_THROWS_AS(parse_offspring("pmf:1=0.5,3=0.25,0=0.25"), Error);
}

TEST_CASE("offspring mean recomputation and round trip") {
  auto rng = make_rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto d = gwtest::random_pmf(rng);
    CHECK(std::abs(d.recomputed_mean() - d.mean()) <= 1e-12);
    const auto again = parse_offspring(d.to_string());
    CHECK(std::abs(again.mean() - d.mean()) <= 1e-12);
  }
}

TEST_CASE("child counts are pure functions of seed and path") {
  LazyTree a(gwtest::coin(), 99), b(gwtest::coin(), 99);
  // Query in different orders.
  const VertexId deep{1, 1, 1, 1};
  std::vector<VertexId> probe;
  std::function<void(const VertexId&, int)> collect = [&](const VertexId& v, int d) {
    probe.push_back(v);
    if (d == 0) return;
    for (std::uint32_t i = 1; i <= b.child_count(b.locate(v)); ++i) collect(v.child(i), d - 1);
  };
  collect(VertexId::root(), 6);
  for (auto it = probe.rbegin(); it != probe.rend(); ++it) a.find(*it);
  for (const auto& v : probe) {
    CHECK(a.child_count(a.find(v)) == b.child_count(b.locate(v)));
    CHECK(a.child_count(a.find(v)) == a.child_count(a.locate(v)));
  }

  LazyTree bin(gwtest::binary(), 5);
  CHECK(bin.child_count(bin.find({2, 1, 2, 2, 1})) == 2u);
  CHECK_THROWS_AS(bin.find({3}), Error);
  CHECK_THROWS_AS(bin.locate({1, 0}), Error);
}

TEST_CASE("root child count frequency matches the pmf") {
  const auto law = gwtest::coin();
  std::uint64_t ones = 0;
  const int n = 100000;
  for (int s = 0; s < n; ++s) {
    LazyTree t(law, static_cast<std::uint64_t>(s));
    ones += t.child_count(t.root()) == 1;
  }
  const double p1 = static_cast<double>(ones) / n;
  CHECK(p1 >= 0.495);
  CHECK(p1 <= 0.505);
}

TEST_CASE("geometric sampler matches its pmf") {
  const auto g = OffspringDistribution::shifted_geometric(0.6);
  std::vector<int> counts(8, 0);
  const int n = 200000;
  auto rng = make_rng(3);
  for (int i = 0; i < n; ++i) {
    const auto k = g.sample(uniform01(rng));
    REQUIRE(k >= 1u);
    if (k < counts.size()) ++counts[k];
  }
  for (std::uint32_t k = 1; k < counts.size(); ++k) {
    const double p = g.probability(k);
    const double sd = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[k] / double(n) - p) <= 4 * sd);
  }
}

TEST_CASE("truncate: complete binary tree and root only") {
  LazyTree t(gwtest::binary(), 1);
  const auto ft = truncate(t, 3);
  CHECK(ft.generation_sizes == std::vector<std::uint64_t>{1, 2, 4, 8});
  CHECK(ft.vertex_count() == 15u);
  const auto f0 = truncate(t, 0);
  CHECK(f0.generation_sizes == std::vector<std::uint64_t>{1});
  CHECK_THROWS_AS(truncate(t, 30, 1000), Error);
}

TEST_CASE("truncate: generation sizes match an independent recount of the memo") {
  for (std::uint64_t seed : {1u, 2u, 17u, 123u}) {
    LazyTree t(gwtest::coin(), seed);
    const auto ft = truncate(t, 5);
    // Independent walk through the materialized API.
    std::vector<std::uint64_t> xi(6, 0);
    std::function<void(NodeId, int)> walk = [&](NodeId x, int d) {
      ++xi[d];
      if (d == 5) return;
      for (std::uint32_t i = 1; i <= t.child_count(x); ++i) walk(t.child(x, i), d + 1);
    };
    walk(t.root(), 0);
    CHECK(ft.generation_sizes == xi);
    for (std::size_t n = 0; n < 5; ++n) {
      std::uint64_t sum = 0;
      for (auto k : ft.child_counts[n]) sum += k;
      CHECK(sum == ft.generation_sizes[n + 1]);
    }
  }
}

TEST_CASE("truncate is reproducible and extends without changing prefixes") {
  auto rng = make_rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const auto law = gwtest::random_pmf(rng, 3);
    const std::uint64_t seed = rng();
    LazyTree a(law, seed), b(law, seed);
    const auto f6 = truncate(a, 6);
    const auto f6b = truncate(b, 6);
    const auto f7 = truncate(b, 7);
    CHECK(f6.child_counts == f6b.child_counts);
    for (std::size_t n = 0; n <= 6; ++n) CHECK(f7.child_counts[n] == f6.child_counts[n]);
    for (const auto& level : f7.child_counts)
      for (auto k : level) CHECK(k >= 1u);
  }
}

TEST_CASE("mean generation size grows like m^n") {
  const auto law = gwtest::coin();
  const int reps = 3000;
  std::vector<double> sum(11, 0.0), sum2(11, 0.0);
  for (int r = 0; r < reps; ++r) {
    LazyTree t(law, derive_seed(2024, static_cast<std::uint64_t>(r)));
    const auto ft = truncate(t, 10);
    for (std::size_t n = 0; n <= 10; ++n) {
      const double x = static_cast<double>(ft.generation_sizes[n]) / std::pow(1.5, n);
      sum[n] += x;
      sum2[n] += x * x;
    }
  }
  for (std::size_t n = 1; n <= 10; ++n) {
    const double mean = sum[n] / reps;
    const double var = sum2[n] / reps - mean * mean;
    const double se = std::sqrt(var / reps);
    CAPTURE(n);
    CHECK(std::abs(mean - 1.0) <= 4 * se);
  }
}

TEST_CASE("grafted subtrees use their own law") {
  auto t = gwtest::mixed_root();
  CHECK(t.child_count(t.find({1})) == 2u);
  CHECK(t.child_count(t.find({2})) == 3u);
  CHECK(t.child_count(t.find({2, 3, 1})) == 3u);
  CHECK(t.child_count(t.locate({1, 2, 2})) == 2u);
  CHECK_FALSE(t.homogeneous_below(t.root_cursor()));
  CHECK(t.homogeneous_below(t.locate({2})));
  CHECK(t.homogeneous_branching(t.locate({2, 1})) == 3u);
  CHECK_THROWS_AS(t.graft({2}, gwtest::binary()), Error);  // {2} already expanded
  CHECK(parse_offspring("pmf:1=0.95,2=0.05").mean() == doctest::Approx(1.05));
}

TEST_CASE("meet level and vertex ids") {
  CHECK(meet_level({1, 2, 1}, {1, 2, 1}) == 3u);
  CHECK(meet_level({1, 1}, {2}) == 0u);
  CHECK(meet_level({1, 2, 1}, {1, 2, 2}) == 2u);
  CHECK(VertexId({1, 2, 3}).parent() == VertexId({1, 2}));
  CHECK(VertexId({1, 2, 3}).to_string() == "[1,2,3]");
  CHECK_THROWS_AS(VertexId::root().parent(), Error);
}

TEST_CASE("tree dump lists vertices in lexicographic order") {
  LazyTree t(gwtest::binary(), 1);
  std::ostringstream os;
  write_tree_dump(os, truncate(t, 2), "abc");
  const std::string expected =
      "{\"config_hash\":\"abc\",\"schema\":\"gwheat.tree/1\",\"depth\":2}\n"
      "{\"path\":[],\"children\":2}\n"
      "{\"path\":[1],\"children\":2}\n"
      "{\"path\":[1,1],\"children\":2}\n"
      "{\"path\":[1,2],\"children\":2}\n"
      "{\"path\":[2],\"children\":2}\n"
      "{\"path\":[2,1],\"children\":2}\n"
      "{\"path\":[2,2],\"children\":2}\n";
  CHECK(os.str() == expected);
}
