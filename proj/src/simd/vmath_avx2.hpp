#pragma once

// Four-lane double-precision exp for AVX2+FMA translation units.
// Only include from sources compiled with -mavx2 -mfma.

#include <immintrin.h>

namespace gwheat::simd::avx2 {

// exp(x) for x in [-709, 709]; inputs outside are clamped, so callers must
// mask lanes that need exact 0 below -700. NaN / -inf inputs give garbage
// and must also be masked.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-709.0);
  x = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  // Taylor polynomial to degree 13 on |r| <= ln2/2.
  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^n via the exponent field; n in [-1023, 1023].
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  __m256i bits = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023 - 0x4338000000000000LL));
  bits = _mm256_slli_epi64(bits, 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

// exp(x) with lanes below -700 (including -inf) set to exactly 0.
inline __m256d clamped_exp_pd(__m256d x) {
  const __m256d keep = _mm256_cmp_pd(x, _mm256_set1_pd(-700.0), _CMP_GE_OQ);
  return _mm256_and_pd(exp_pd(x), keep);
}

// 1 - exp(-y) for y >= 0 without cancellation for small y.
inline __m256d one_minus_exp_neg_pd(__m256d y) {
  // Alternating series sum_{k>=1} (-1)^{k+1} y^k / k! for y <= 0.5.
  __m256d s = _mm256_set1_pd(-1.0 / 355687428096000.0);
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 20922789888000.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 1307674368000.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 87178291200.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 6227020800.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 479001600.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 39916800.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 3628800.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 362880.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 40320.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 5040.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 720.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 120.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(1.0 / 24.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(-1.0 / 6.0));
  s = _mm256_fmadd_pd(s, y, _mm256_set1_pd(0.5));
  s = _mm256_fnmadd_pd(s, y, _mm256_set1_pd(1.0));
  const __m256d small = _mm256_mul_pd(s, y);

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d large = _mm256_sub_pd(one, exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), y)));
  const __m256d use_small = _mm256_cmp_pd(y, _mm256_set1_pd(0.5), _CMP_LE_OQ);
  return _mm256_blendv_pd(large, small, use_small);
}

}  // namespace gwheat::simd::avx2
