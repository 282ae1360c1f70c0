#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant. The variant is chosen once at startup from the CPU feature
// flags (override with GWHEAT_ISA=scalar|avx2) and can be switched at
// runtime for equivalence testing.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace gwheat::simd {

enum class Isa { scalar, avx2 };

const char* to_string(Isa isa) noexcept;
bool supported(Isa isa) noexcept;
Isa active_isa() noexcept;
// Throws gwheat::Error when the CPU lacks the requested instruction set.
void set_active_isa(Isa isa);

// Per-level coefficients of the boundary heat kernel along one ray, all in
// natural-log space. Arrays are indexed by level n = 0..L.
struct SeriesLevels {
  std::span<const double> log_H;  // log HARM(Sigma([w]_n))
  std::span<const double> log_D;  // log D([w]_n)
  // log(1/H_{n+1} - 1/H_n); -inf when the vertex is unary. Size L.
  std::span<const double> diag_log_coef;
  // log(1/D_n - 1/D_{n-1}) + log D_n = log(1 - D_n/D_{n-1}); 0 at n = 0.
  std::span<const double> offdiag_log_gap;
};

struct DiagOptions {
  double rel_tol = 1e-15;     // a term is "quiet" below rel_tol * partial sum
  int quiet_terms = 5;        // consecutive quiet terms required to stop
  double min_time_ratio = 50; // and t / D_n must exceed this
};

struct DiagResult {
  double value = 0.0;
  std::int32_t levels_used = 0;  // number of series terms summed
  bool converged = false;
};

// p_t(w,w) = 1 + sum_n (1/H_{n+1} - 1/H_n) exp(-t/D_n) for every t = exp(log_t[j]).
void diag_series(const SeriesLevels& levels, std::span<const double> log_t,
                 const DiagOptions& options, std::span<DiagResult> out);

// Cumulative off-diagonal sums: out[j * (max_level + 1) + n] holds
// sum_{k<=n} (exp(-t/D_{k-1}) - exp(-t/D_k)) / H_k  for t = exp(log_t[j]).
void offdiag_prefix(const SeriesLevels& levels, std::size_t max_level,
                    std::span<const double> log_t, std::span<double> out);

// Scalar exp with the library-wide underflow convention (x < -700 -> 0).
double clamped_exp(double x) noexcept;

namespace detail {
// Entry points of each instruction-set variant (exposed for testing).
void diag_series_scalar(const SeriesLevels&, std::span<const double>, const DiagOptions&,
                        std::span<DiagResult>);
void offdiag_prefix_scalar(const SeriesLevels&, std::size_t, std::span<const double>,
                           std::span<double>);
void diag_series_avx2(const SeriesLevels&, std::span<const double>, const DiagOptions&,
                      std::span<DiagResult>);
void offdiag_prefix_avx2(const SeriesLevels&, std::size_t, std::span<const double>,
                         std::span<double>);
// Elementwise vector exp / (1 - exp(-y)) used by the AVX2 kernels.
void exp_avx2(std::span<const double> x, std::span<double> out);
void one_minus_exp_neg_avx2(std::span<const double> y, std::span<double> out);
}  // namespace detail

}  // namespace gwheat::simd
