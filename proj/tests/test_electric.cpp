#include <sstream>

#include "doctest.h"
#include "gwheat/electric.hpp"
#include "gwheat/error.hpp"
#include "gwheat/simd/kernels.hpp"
#include "support.hpp"

using namespace gwheat;

namespace {

ResistancePolicy tight() {
  ResistancePolicy p;
  p.target_gap = 1e-12;
  return p;
}

}  // namespace

TEST_CASE("conductance") {
  CHECK(conductance(1.0, 17) == 1.0);
  CHECK(conductance(2.0, 3) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(log_conductance(0.5, 60) == doctest::Approx(60 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("b-ary trees reach the closed form 1/(b - lambda)") {
  struct Case {
    const char* law;
    double lambda, expected;
  };
  for (const auto& c : {Case{"pmf:2=1", 0.5, 2.0 / 3.0}, Case{"pmf:2=1", 1.0, 1.0},
                        Case{"pmf:2=1", 1.5, 2.0}, Case{"pmf:3=1", 1.0, 0.5},
                        Case{"pmf:3=1", 2.5, 2.0}, Case{"pmf:4=1", 0.2, 1 / 3.8}}) {
    CAPTURE(c.law);
    CAPTURE(c.lambda);
    LazyTree t(parse_offspring(c.law), 3);
    ElectricNetwork net(t, c.lambda, tight());
    for (const VertexId& v : {VertexId{}, VertexId{1}, VertexId{2, 1, 1}}) {
      const auto r = net.resistance(v);
      CHECK(r.resolved);
      CHECK(r.lo() <= r.hi());
      CHECK(gwtest::rel_err(r.mid(), c.expected) <= 1e-9);
    }
  }
}

TEST_CASE("small hand-solved networks") {
  // Root with two children, frontier shorted at depth 1: two unit resistors in parallel.
  LazyTree bin(gwtest::binary(), 1);
  CHECK(truncated_resistance(bin, {}, 1.0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(resistance_oracle(truncate(bin, 1), 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Depth-2 binary, lambda = 2: middle vertices 1/(2/(1+0)) = 1/2, root 1/(2/(1+2*1/2)) = 1.
  CHECK(truncated_resistance(bin, {}, 2.0, 2) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(resistance_oracle(truncate(bin, 2), 2.0) - 1.0) <= 1e-12);
  // Binary depth 8, lambda = 1: grounded value from the fixed-point iteration.
  double r = 0.0;
  for (int j = 0; j < 8; ++j) r = (1.0 + r) / 2.0;
  CHECK(std::abs(resistance_oracle(truncate(bin, 8), 1.0) - r) <= 1e-10);
  CHECK(std::abs(truncated_resistance(bin, {}, 1.0, 8) - r) <= 1e-14);
}

TEST_CASE("recursion agrees with the Laplacian oracle on random trees") {
  auto rng = make_rng(2718);
  for (int rep = 0; rep < 100; ++rep) {
    const auto law = gwtest::random_pmf(rng, 3);
    const double lambda = 0.2 + 2.0 * uniform01(rng);
    const auto depth = static_cast<std::uint32_t>(1 + rng() % 8);
    LazyTree t(law, rng());
    const auto ft = truncate(t, depth);
    const double rec = truncated_resistance(t, {}, lambda, depth);
    const double orc = resistance_oracle(ft, lambda);
    CAPTURE(rep);
    CHECK(gwtest::rel_err(rec, orc) <= 1e-9);
    const double closure = 0.7 + uniform01(rng);
    CHECK(gwtest::rel_err(truncated_resistance(t, {}, lambda, depth, closure),
                          resistance_oracle(ft, lambda, closure)) <= 1e-9);
  }
}

TEST_CASE("grounded values are nondecreasing in depth and bracketed for lambda < 1") {
  auto rng = make_rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    const double lambda = 0.1 + 0.85 * uniform01(rng);
    LazyTree t(gwtest::coin(), rng());
    const double cap = 1.0 / (1.0 - lambda);
    double prev = 0.0;
    for (std::uint32_t d = 1; d <= 14; ++d) {
      const double lo = truncated_resistance(t, {}, lambda, d);
      const double hi = truncated_resistance(t, {}, lambda, d, cap);
      CHECK(lo >= prev);
      CHECK(lo <= hi);
      CHECK(hi <= cap + 1e-12);
      prev = lo;
    }
  }
}

TEST_CASE("adaptive intervals overlap exhaustive truncations") {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    LazyTree t(gwtest::coin(), seed);
    ElectricNetwork net(t, 0.8);
    const auto r = net.resistance(t.root());
    CHECK(r.resolved);
    CHECK(r.closure_hi == Closure::deterministic_bound);
    CHECK(r.log_gap() <= 1e-6);
    CHECK(r.hi() <= 5.0 + 1e-12);
    for (std::uint32_t d : {6u, 12u, 18u}) {
      CHECK(r.lo() <= truncated_resistance(t, {}, 0.8, d, 5.0) * (1 + 1e-12));
      CHECK(truncated_resistance(t, {}, 0.8, d) <= r.hi() * (1 + 1e-12));
    }
  }
}

TEST_CASE("lambda >= 1 uses the extrapolated closure and converges") {
  LazyTree t(gwtest::coin(), 12);
  ResistancePolicy p;
  p.target_gap = 1e-4;
  ElectricNetwork net(t, 1.0, p);
  const auto r = net.resistance(t.root());
  CHECK(r.resolved);
  CHECK(r.closure_hi == Closure::converged);
  const double deep = truncated_resistance(t, {}, 1.0, 30);
  CHECK(deep <= r.hi() * (1 + 1e-9));
  CHECK(gwtest::rel_err(deep, r.mid()) <= 1e-3);
}

TEST_CASE("caps produce flagged intervals and warnings") {
  LazyTree t(gwtest::coin(), 8);
  ResistancePolicy p;
  p.max_depth = 4;
  ElectricNetwork net(t, 0.9, p);
  const auto r = net.resistance(t.root());
  CHECK_FALSE(r.resolved);
  CHECK(r.lo() <= r.hi());
  CHECK(net.warning_count() == 1u);
  CHECK(net.warnings().front().reason == "depth cap reached");
}

TEST_CASE("transience is required") {
  LazyTree t(gwtest::coin(), 1);
  CHECK_THROWS_AS(ElectricNetwork(t, 1.5), Error);
  try {
    ElectricNetwork net(t, 2.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_transient);
  }
  CHECK_THROWS_AS(ElectricNetwork(t, -1.0), Error);
}

TEST_CASE("escape probability") {
  CHECK(escape_probability(1.0, 1.0) == 0.5);
  CHECK(escape_probability(2.0 / 3.0, 0.5) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(escape_probability(1e300, 1.0) < 1e-299);
  LazyTree t(gwtest::coin(), 21);
  ElectricNetwork net(t, 0.7);
  for (std::uint32_t i = 1; i <= t.child_count(t.root()); ++i) {
    const auto r = net.resistance(t.child(t.root(), i));
    const double a_mid = escape_probability(r.mid(), 0.7);
    CHECK(a_mid > 0.0);
    CHECK(a_mid < 1.0);
    CHECK(escape_probability(r.hi(), 0.7) <= a_mid);
    CHECK(a_mid <= escape_probability(r.lo(), 0.7));
  }
}

TEST_CASE("harmonic flow") {
  {
    LazyTree t(gwtest::binary(), 1);
    ElectricNetwork net(t, 1.3, tight());
    const auto f = net.harmonic_flow(t.root());
    CHECK(f.masses == std::vector<double>{0.5, 0.5});
  }
  {
    auto t = gwtest::mixed_root();
    ElectricNetwork net(t, 1.0, tight());
    const auto f = net.harmonic_flow(t.root());
    REQUIRE(f.masses.size() == 2u);
    CHECK(std::abs(f.masses[0] - 3.0 / 7.0) <= 1e-9);
    CHECK(std::abs(f.masses[1] - 4.0 / 7.0) <= 1e-9);
    CHECK_FALSE(f.flagged);
  }
  auto rng = make_rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    LazyTree t(gwtest::random_pmf(rng, 4), rng());
    const double lambda = 0.3 + 0.6 * uniform01(rng);
    ElectricNetwork net(t, lambda);
    const double parent = 0.37;
    const auto f = net.harmonic_flow(t.root(), parent);
    double sum = 0.0;
    for (double m : f.masses) {
      CHECK(m >= 0.0);
      CHECK(m <= parent);
      sum += m;
    }
    CHECK(std::abs(sum - parent) <= 1e-12);
  }
}

TEST_CASE("resistance traversal is identical across instruction sets") {
  if (!simd::supported(simd::Isa::avx2)) return;
  const auto saved = simd::active_isa();
  auto rng = make_rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const auto law = gwtest::random_pmf(rng, 3);
    const double lambda = 0.3 + 0.7 * uniform01(rng);
    const std::uint64_t seed = rng();
    LazyTree a(law, seed), b(law, seed);
    simd::set_active_isa(simd::Isa::scalar);
    ElectricNetwork na(a, lambda);
    const auto ra = na.resistance(a.root());
    const double ta = truncated_resistance(a, {}, lambda, 9, 1.0);
    simd::set_active_isa(simd::Isa::avx2);
    ElectricNetwork nb(b, lambda);
    const auto rb = nb.resistance(b.root());
    const double tb = truncated_resistance(b, {}, lambda, 9, 1.0);
    CHECK(ra.log_lo == rb.log_lo);
    CHECK(ra.log_hi == rb.log_hi);
    CHECK(ta == tb);
  }
  simd::set_active_isa(saved);
}

TEST_CASE("resistance CSV rows") {
  std::ostringstream os;
  ResistanceInterval r;
  r.log_lo = -0.5;
  r.log_hi = -0.25;
  r.depth_used = 12;
  write_resistance_csv_header(os, "h");
  write_resistance_csv_row(os, VertexId{1, 2}, r);
  CHECK(os.str() ==
        "# config_hash=h\npath,h,log_r_lo,log_r_hi,closure_lo,closure_hi,depth_used\n"
        "1:2,2,-0.5,-0.25,grounded,deterministic-bound,12\n");
}
