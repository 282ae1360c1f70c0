#include <atomic>
#include <cstdlib>
#include <string_view>

#include "gwheat/error.hpp"
#include "gwheat/simd/kernels.hpp"

namespace gwheat::simd {

namespace {

Isa initial_isa() noexcept {
  if (const char* env = std::getenv("GWHEAT_ISA")) {
    const std::string_view v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && supported(Isa::avx2)) return Isa::avx2;
  }
  return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& current() noexcept {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

bool supported(Isa isa) noexcept {
  if (isa == Isa::scalar) return true;
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!supported(isa))
    fail(ErrorCode::invalid_input, std::string("instruction set not available: ") + to_string(isa));
  current().store(isa, std::memory_order_relaxed);
}

void diag_series(const SeriesLevels& levels, std::span<const double> log_t,
                 const DiagOptions& options, std::span<DiagResult> out) {
  if (active_isa() == Isa::avx2)
    detail::diag_series_avx2(levels, log_t, options, out);
  else
    detail::diag_series_scalar(levels, log_t, options, out);
}

void offdiag_prefix(const SeriesLevels& levels, std::size_t max_level,
                    std::span<const double> log_t, std::span<double> out) {
  if (active_isa() == Isa::avx2)
    detail::offdiag_prefix_avx2(levels, max_level, log_t, out);
  else
    detail::offdiag_prefix_scalar(levels, max_level, log_t, out);
}

}  // namespace gwheat::simd
