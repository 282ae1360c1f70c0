#include <algorithm>
#include <cmath>

#include "gwheat/simd/kernels.hpp"

namespace gwheat::simd {

double clamped_exp(double x) noexcept {
  if (!(x >= -700.0)) return 0.0;
  return std::exp(std::min(x, 709.0));
}

namespace detail {

void diag_series_scalar(const SeriesLevels& levels, std::span<const double> log_t,
                        const DiagOptions& options, std::span<DiagResult> out) {
  const std::size_t n_levels = levels.diag_log_coef.size();
  for (std::size_t j = 0; j < log_t.size(); ++j) {
    DiagResult res;
    double value = 1.0;
    int quiet = 0;
    res.levels_used = static_cast<std::int32_t>(n_levels);
    for (std::size_t n = 0; n < n_levels; ++n) {
      const double ratio = std::exp(std::min(log_t[j] - levels.log_D[n], 700.0));
      const double term = clamped_exp(levels.diag_log_coef[n] - ratio);
      value += term;
      quiet = term < options.rel_tol * value ? quiet + 1 : 0;
      if (quiet >= options.quiet_terms && ratio > options.min_time_ratio) {
        res.converged = true;
        res.levels_used = static_cast<std::int32_t>(n + 1);
        break;
      }
    }
    res.value = value;
    out[j] = res;
  }
}

void offdiag_prefix_scalar(const SeriesLevels& levels, std::size_t max_level,
                           std::span<const double> log_t, std::span<double> out) {
  const std::size_t width = max_level + 1;
  for (std::size_t j = 0; j < log_t.size(); ++j) {
    double acc = 0.0;
    for (std::size_t n = 0; n <= max_level; ++n) {
      const double a =
          n == 0 ? 0.0 : std::exp(std::min(log_t[j] - levels.log_D[n - 1], 700.0));
      const double y =
          std::exp(std::min(log_t[j] - levels.log_D[n] + levels.offdiag_log_gap[n], 700.0));
      const double term = clamped_exp(-a - levels.log_H[n]) * -std::expm1(-y);
      acc += term;
      out[j * width + n] = acc;
    }
  }
}

}  // namespace detail
}  // namespace gwheat::simd
