#include <algorithm>
#include <array>
#include <immintrin.h>

#include "gwheat/simd/kernels.hpp"
#include "vmath_avx2.hpp"

namespace gwheat::simd::detail {

using namespace gwheat::simd::avx2;

namespace {

// Loads up to four values, repeating the last one into unused lanes.
__m256d load_padded(std::span<const double> v, std::size_t j) {
  std::array<double, 4> buf;
  for (std::size_t l = 0; l < 4; ++l) buf[l] = v[std::min(j + l, v.size() - 1)];
  return _mm256_loadu_pd(buf.data());
}

}  // namespace

void exp_avx2(std::span<const double> x, std::span<double> out) {
  for (std::size_t j = 0; j < x.size(); j += 4) {
    alignas(32) double buf[4];
    _mm256_store_pd(buf, clamped_exp_pd(load_padded(x, j)));
    for (std::size_t l = 0; l < 4 && j + l < x.size(); ++l) out[j + l] = buf[l];
  }
}

void one_minus_exp_neg_avx2(std::span<const double> y, std::span<double> out) {
  for (std::size_t j = 0; j < y.size(); j += 4) {
    alignas(32) double buf[4];
    _mm256_store_pd(buf, one_minus_exp_neg_pd(load_padded(y, j)));
    for (std::size_t l = 0; l < 4 && j + l < y.size(); ++l) out[j + l] = buf[l];
  }
}

void diag_series_avx2(const SeriesLevels& levels, std::span<const double> log_t,
                      const DiagOptions& options, std::span<DiagResult> out) {
  const std::size_t n_levels = levels.diag_log_coef.size();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d cap = _mm256_set1_pd(700.0);
  const __m256d tol = _mm256_set1_pd(options.rel_tol);
  const __m256d need_quiet = _mm256_set1_pd(options.quiet_terms);
  const __m256d min_ratio = _mm256_set1_pd(options.min_time_ratio);

  for (std::size_t j = 0; j < log_t.size(); j += 4) {
    const __m256d lt = load_padded(log_t, j);
    __m256d value = one;
    __m256d quiet = _mm256_setzero_pd();
    __m256d active = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    std::array<std::int32_t, 4> used;
    used.fill(static_cast<std::int32_t>(n_levels));

    for (std::size_t n = 0; n < n_levels; ++n) {
      const __m256d arg = _mm256_min_pd(_mm256_sub_pd(lt, _mm256_set1_pd(levels.log_D[n])), cap);
      const __m256d ratio = exp_pd(arg);
      const __m256d x = _mm256_sub_pd(_mm256_set1_pd(levels.diag_log_coef[n]), ratio);
      const __m256d term = _mm256_and_pd(clamped_exp_pd(x), active);
      value = _mm256_add_pd(value, term);

      const __m256d is_quiet = _mm256_cmp_pd(term, _mm256_mul_pd(tol, value), _CMP_LT_OQ);
      quiet = _mm256_and_pd(_mm256_add_pd(quiet, one), is_quiet);
      const __m256d done =
          _mm256_and_pd(_mm256_and_pd(_mm256_cmp_pd(quiet, need_quiet, _CMP_GE_OQ),
                                      _mm256_cmp_pd(ratio, min_ratio, _CMP_GT_OQ)),
                        active);
      const int done_mask = _mm256_movemask_pd(done);
      if (done_mask) {
        for (int l = 0; l < 4; ++l)
          if (done_mask & (1 << l)) used[l] = static_cast<std::int32_t>(n + 1);
        active = _mm256_andnot_pd(done, active);
        if (_mm256_movemask_pd(active) == 0) break;
      }
    }

    alignas(32) double vbuf[4];
    _mm256_store_pd(vbuf, value);
    const int still_active = _mm256_movemask_pd(active);
    for (std::size_t l = 0; l < 4 && j + l < log_t.size(); ++l) {
      out[j + l] = DiagResult{vbuf[l], used[l], (still_active & (1 << l)) == 0};
    }
  }
}

void offdiag_prefix_avx2(const SeriesLevels& levels, std::size_t max_level,
                         std::span<const double> log_t, std::span<double> out) {
  const std::size_t width = max_level + 1;
  const __m256d cap = _mm256_set1_pd(700.0);
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t j = 0; j < log_t.size(); j += 4) {
    const __m256d lt = load_padded(log_t, j);
    __m256d acc = zero;
    __m256d a = zero;
    for (std::size_t n = 0; n <= max_level; ++n) {
      const __m256d ld = _mm256_set1_pd(levels.log_D[n]);
      const __m256d y = exp_pd(_mm256_min_pd(
          _mm256_add_pd(_mm256_sub_pd(lt, ld), _mm256_set1_pd(levels.offdiag_log_gap[n])), cap));
      const __m256d w = clamped_exp_pd(
          _mm256_sub_pd(_mm256_sub_pd(zero, a), _mm256_set1_pd(levels.log_H[n])));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(w, one_minus_exp_neg_pd(y)));
      a = exp_pd(_mm256_min_pd(_mm256_sub_pd(lt, ld), cap));

      alignas(32) double buf[4];
      _mm256_store_pd(buf, acc);
      for (std::size_t l = 0; l < 4 && j + l < log_t.size(); ++l) out[(j + l) * width + n] = buf[l];
    }
  }
}

}  // namespace gwheat::simd::detail
