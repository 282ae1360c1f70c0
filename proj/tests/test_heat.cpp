#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "gwheat/error.hpp"
#include "gwheat/heat.hpp"
#include "support.hpp"

using namespace gwheat;

namespace {

// Direct long-double evaluation of the two series on level arrays.
long double oracle_diag(const RayProfile& p, long double t) {
  long double v = 1.0L;
  for (std::size_t n = 0; n < p.levels(); ++n) {
    const long double c = 1.0L / std::exp((long double)p.log_H[n + 1]) -
                          1.0L / std::exp((long double)p.log_H[n]);
    v += c * std::exp(-t / std::exp((long double)p.log_D[n]));
  }
  return v;
}

long double oracle_offdiag(const RayProfile& p, std::size_t N, long double t) {
  long double v = 0.0L, prev = 1.0L;
  for (std::size_t n = 0; n <= N; ++n) {
    const long double e = std::exp(-t / std::exp((long double)p.log_D[n]));
    v += (prev - e) / std::exp((long double)p.log_H[n]);
    prev = e;
  }
  return v;
}

ResistancePolicy loose(double gap = 1e-4) {
  ResistancePolicy p;
  p.target_gap = gap;
  return p;
}

std::size_t branching_level(const RayProfile& p, std::size_t from) {
  while (p.branching[from] < 2) ++from;
  return from;
}

}  // namespace

TEST_CASE("binary lambda=1 fixtures") {
  const auto p = gwtest::binary_profile(1.0, 80);
  CHECK(p_diag(p, 1.0).value == doctest::Approx(1.714498064786025).epsilon(1e-13));
  CHECK(p_offdiag(p, 1, 1.0).value == doctest::Approx(1.097208874698217).epsilon(1e-13));
  for (double t : {1e-3, 0.5, 1.0, 7.0})
    CHECK(p_offdiag(p, 0, t).value == doctest::Approx(-std::expm1(-t)).epsilon(1e-14));
  const auto sd = shell_distribution(p, 1.0, 60);
  CHECK(sd.q[0] == doctest::Approx(0.316060279414279).epsilon(1e-13));
  CHECK(moments(p, 1.0, 1.0, Metric::d).value == doctest::Approx(0.449971038971967).epsilon(1e-12));
  CHECK(q_t_reference(p, 1, 0.25) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(q_t_reference(p, 2, 0.3) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("series match a long-double oracle on random profiles") {
  auto rng = make_rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> lh{0.0}, ld{std::log(0.5 + 2 * uniform01(rng))};
    for (int n = 1; n <= 70; ++n) {
      lh.push_back(lh.back() - (uniform01(rng) < 0.3 ? 0.0 : 1.5 * uniform01(rng)));
      ld.push_back(ld.back() - 0.05 - uniform01(rng));
    }
    const auto p = RayProfile::from_levels(1.0, lh, ld);
    for (double t : gwtest::log_grid(1e-6, 10.0, 13)) {
      CAPTURE(t);
      const auto d = p_diag(p, t);
      CHECK(gwtest::rel_err(d.value, (double)oracle_diag(p, t)) <= 1e-12);
      for (std::size_t N : {0u, 3u, 17u, 70u}) {
        const double o = (double)oracle_offdiag(p, N, t);
        const double v = p_offdiag(p, N, t).value;
        CHECK(std::abs(v - o) <= 1e-12 * o + 1e-300);
        CHECK(v <= d.value * (1 + 1e-13));
      }
    }
  }
}

TEST_CASE("off-diagonal values are nondecreasing in N and symmetric") {
  LazyTree t(gwtest::coin(), 11);
  ElectricNetwork net(t, 0.8, loose());
  auto rng = make_rng(12);
  const auto w = sample_ray(net, 30, rng);
  const std::size_t k = branching_level(w, 4);
  const auto eta = resample_below(net, w, k, 30, rng);
  for (double s : gwtest::log_grid(1e-5, 5.0, 9)) {
    double prev = 0.0;
    for (std::size_t N = 0; N <= 30; ++N) {
      const double v = p_offdiag(w, N, s).value;
      CHECK(v >= prev);
      prev = v;
    }
    CHECK(std::abs(p_offdiag(w, k, s).value - p_offdiag(eta, k, s).value) <=
          1e-12 * p_offdiag(w, k, s).value);
  }
}

TEST_CASE("shell masses telescope") {
  LazyTree t(parse_offspring("pmf:1=0.2,2=0.5,3=0.3"), 3);
  ElectricNetwork net(t, 0.7, loose());
  auto rng = make_rng(4);
  const auto p = sample_ray(net, 40, rng);
  for (double s : gwtest::log_grid(1e-4, 100.0, 9)) {
    const auto sd = shell_distribution(p, s, 39);
    double total = 0.0;
    for (double q : sd.q) {
      CHECK(q >= 0.0);
      total += q;
    }
    CHECK(std::abs(total + sd.residual - 1.0) <= 1e-12);
    CHECK(std::abs(sd.residual - sd.analytic_residual) <= 1e-12);
  }
  // Long times: shells carry their HARM mass.
  const auto far = shell_distribution(p, 1e9, 39);
  for (std::size_t n = 0; n < 39; ++n)
    CHECK(far.q[n] == doctest::Approx(std::exp(p.log_H[n]) - std::exp(p.log_H[n + 1])).epsilon(1e-6));
}

TEST_CASE("short profiles are reported as under-resolved") {
  const auto p = gwtest::binary_profile(1.0, 10);
  try {
    p_diag(p, 1e-6);
    FAIL("expected under_resolved");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::under_resolved);
  }
  CHECK(diag_levels_needed(p, 1e-6) > 10u);
  const auto longer = gwtest::binary_profile(1.0, static_cast<int>(diag_levels_needed(p, 1e-6)));
  CHECK_NOTHROW(p_diag(longer, 1e-6));
  CHECK_THROWS_AS(moments(p, 1e-4, 1.0, Metric::D), Error);
  CHECK(shell_distribution(p, 1e-4, 9).under_resolved);
  CHECK_THROWS_AS(p_offdiag(p, 11, 1.0), Error);
  CHECK_THROWS_AS(p_offdiag(p, 1, 0.0), Error);
}

TEST_CASE("moments decrease in gamma and vanish as t -> 0") {
  const auto p = gwtest::binary_profile(1.0, 120);
  double prev = INFINITY;
  for (double g : {0.3, 1.0, 2.0, 4.0}) {
    const double v = moments(p, 0.5, g, Metric::d).value;
    CHECK(v < prev);
    prev = v;
  }
  CHECK(moments(p, 1e-12, 1.0, Metric::D).value < 1e-10);
}

TEST_CASE("kernel bounds hold pointwise") {
  const auto grid = gwtest::log_grid(1e-8, 10.0, 40);
  auto check = [&](const RayProfile& p) {
    const auto b = check_kernel_bounds(p, grid);
    CHECK(b.lower_checked > 0u);
    CHECK(b.upper_checked > 0u);
    CHECK(b.lower_violations == 0u);
    CHECK(b.upper_violations == 0u);
  };
  check(gwtest::binary_profile(1.0, 80));
  check(gwtest::binary_profile(1.2, 80));
  LazyTree t(gwtest::coin(), 21);
  ElectricNetwork net(t, 1.0, loose(1e-3));
  auto rng = make_rng(22);
  check(sample_ray(net, 60, rng));
}

TEST_CASE("mass and Chapman-Kolmogorov checks on the binary tree") {
  LazyTree t(gwtest::binary(), 1);
  ElectricNetwork net(t, 1.0);
  auto rng = make_rng(9);
  const auto w = sample_ray(net, 14, rng);
  CHECK(verify_mass(net, w, 1.0, 12).defect <= 1e-8);
  CHECK(verify_mass(net, w, 1e6, 12).defect <= 1e-12);
  const auto eta = resample_below(net, w, 3, 14, rng);
  const auto ck = verify_ck(net, w, eta, 0.1, 0.1, 12);
  CHECK(ck.cells == 4096u);
  CHECK(ck.rel_error <= 1e-6);
  CHECK_THROWS_AS(verify_mass(net, w, 1e-9, 12), Error);
}

TEST_CASE("mass check on a GW tree") {
  LazyTree t(gwtest::coin(), 31);
  ElectricNetwork net(t, 1.0, loose(1e-3));
  auto rng = make_rng(32);
  const auto w = sample_ray(net, 14, rng);
  const auto m = verify_mass(net, w, 0.5, 14);
  CHECK(m.defect <= 1e-6);
  const auto eta = resample_below(net, w, branching_level(w, 2), 14, rng);
  CHECK(verify_ck(net, w, eta, 0.3, 0.2, 14).rel_error <= 1e-6);
}

TEST_CASE("scalar and AVX2 kernels agree") {
  if (!simd::supported(simd::Isa::avx2)) return;
  auto rng = make_rng(40);
  std::vector<double> x(1001), a(1001), b(1001);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -745.0 + 1450.0 * uniform01(rng);
  simd::detail::exp_avx2(x, a);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ref = simd::clamped_exp(x[i]);
    if (ref == 0.0) CHECK(a[i] == 0.0);
    else CHECK(std::abs(a[i] - ref) <= 4e-16 * ref);
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::exp(-30.0 + 35.0 * uniform01(rng));
  simd::detail::one_minus_exp_neg_avx2(x, a);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(a[i] + std::expm1(-x[i])) <= 4e-16 * a[i]);

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> lh{0.0}, ld{0.3};
    for (int n = 1; n <= 90; ++n) {
      lh.push_back(lh.back() - (uniform01(rng) < 0.3 ? 0.0 : 1.2 * uniform01(rng)));
      ld.push_back(ld.back() - 0.01 - 0.7 * uniform01(rng));
    }
    const SeriesData s(RayProfile::from_levels(1.0, lh, ld));
    std::vector<double> lt;
    for (int j = 0; j < 37; ++j) lt.push_back(-25.0 + 28.0 * uniform01(rng));
    std::vector<simd::DiagResult> ds(lt.size()), da(lt.size());
    simd::detail::diag_series_scalar(s.view(), lt, {}, ds);
    simd::detail::diag_series_avx2(s.view(), lt, {}, da);
    for (std::size_t j = 0; j < lt.size(); ++j) {
      CHECK(gwtest::rel_err(da[j].value, ds[j].value) <= 1e-13);
      CHECK(da[j].converged == ds[j].converged);
      CHECK(std::abs(da[j].levels_used - ds[j].levels_used) <= 1);
    }
    std::vector<double> os(lt.size() * 91), oa(lt.size() * 91);
    simd::detail::offdiag_prefix_scalar(s.view(), 90, lt, os);
    simd::detail::offdiag_prefix_avx2(s.view(), 90, lt, oa);
    for (std::size_t i = 0; i < os.size(); ++i) CHECK(std::abs(oa[i] - os[i]) <= 1e-13 * os[i]);
  }
}

TEST_CASE("two grid steps match one double step in law") {
  LazyTree t(gwtest::binary(), 2);
  ElectricNetwork net(t, 1.0);
  auto rng = make_rng(50);
  const auto start = sample_ray(net, 12, rng);
  const double dt = 0.05;
  const auto one = shell_distribution(start, 2 * dt, 11);
  const int reps = 40000;
  std::map<std::size_t, int> counts;
  TrajectoryOptions opt;
  opt.report_depth = 12;
  for (int i = 0; i < reps; ++i) {
    const std::vector<double> times{dt, 2 * dt};
    const auto path = sample_trajectory(net, start, times, rng, opt);
    REQUIRE(path.size() == 2u);
    ++counts[meet_level(path[1].ray_prefix, start.vertex(12))];
  }
  for (std::size_t n = 0; n < 8; ++n) {
    const double p = one.q[n];
    const double sd = std::sqrt(p * (1 - p) / reps);
    CAPTURE(n);
    CHECK(std::abs(counts[n] / double(reps) - p) <= 3 * sd + 1e-12);
  }
}

TEST_CASE("a long step lands with the shell HARM masses") {
  LazyTree t(gwtest::coin(), 60);
  ElectricNetwork net(t, 0.8, loose());
  auto rng = make_rng(61);
  const auto start = sample_ray(net, 10, rng);
  const int reps = 4000;
  std::map<std::size_t, int> shells;
  for (int i = 0; i < reps; ++i) {
    const std::vector<double> times{1e8};
    const auto path = sample_trajectory(net, start, times, rng, {.report_depth = 10});
    ++shells[path[0].shell_drawn];
  }
  for (std::size_t n = 0; n < 4; ++n) {
    const double p = std::exp(start.log_H[n]) - std::exp(start.log_H[n + 1]);
    const double sd = std::sqrt(p * (1 - p) / reps);
    CHECK(std::abs(shells[n] / double(reps) - p) <= 4 * sd + 1e-12);
  }
}

TEST_CASE("tiny steps stay near the start") {
  LazyTree t(gwtest::binary(), 3);
  ElectricNetwork net(t, 1.0);
  auto rng = make_rng(70);
  const auto start = sample_ray(net, 12, rng);
  const std::vector<double> times{1e-6};
  const auto path = sample_trajectory(net, start, times, rng);
  CHECK(path[0].shell_drawn > 12u);
  CHECK(path[0].ray_prefix == start.vertex(12));
  const auto sd = shell_distribution(start, 1e-6, 11);
  CHECK(sd.q[0] == doctest::Approx(0.5 * -std::expm1(-1e-6)).epsilon(1e-12));
}

TEST_CASE("output formats") {
  std::ostringstream os;
  const std::vector<double> t{0.5};
  const std::vector<KernelValue> v{{1.25, 0.0, 3, true}};
  write_kernel_csv(os, t, v, "h");
  CHECK(os.str() == "# config_hash=h\nt,value,tail_bound\n0.5,1.25,0\n");
  std::ostringstream js;
  const std::vector<TrajectoryPoint> path{{0.5, VertexId{1, 2}, 3}};
  write_trajectory_jsonl(js, path, "h");
  CHECK(js.str() ==
        "{\"config_hash\":\"h\"}\n{\"time\":0.5,\"ray_prefix\":[1,2],\"shell_drawn\":3}\n");
}
