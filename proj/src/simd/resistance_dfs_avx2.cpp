#include <immintrin.h>

#include "../resistance_dfs.hpp"

namespace gwheat::detail {

namespace {

struct Avx2Ops {
  using V = __m256d;

  static V zero() { return _mm256_setzero_pd(); }
  static V closure(double hi) { return _mm256_set_pd(hi, 0.0, 0.0, 0.0); }
  static V set(double a, double b, double c, double d) { return _mm256_set_pd(d, c, b, a); }
  static V add_branch(V acc, V r, double lambda) {
    const V one = _mm256_set1_pd(1.0);
    const V w = _mm256_div_pd(one, _mm256_add_pd(one, _mm256_mul_pd(_mm256_set1_pd(lambda), r)));
    return _mm256_add_pd(acc, w);
  }
  static V reciprocal(V acc) { return _mm256_div_pd(_mm256_set1_pd(1.0), acc); }
  static V ground_lanes(V r, unsigned active) {
    const int mask = (active & 2u ? 0 : 0b0010) | (active & 4u ? 0 : 0b0100);
    switch (mask) {
      case 0b0010: return _mm256_blend_pd(r, _mm256_setzero_pd(), 0b0010);
      case 0b0100: return _mm256_blend_pd(r, _mm256_setzero_pd(), 0b0100);
      case 0b0110: return _mm256_blend_pd(r, _mm256_setzero_pd(), 0b0110);
      default: return r;
    }
  }
  static std::array<double, 4> store(V v) {
    std::array<double, 4> out;
    _mm256_storeu_pd(out.data(), v);
    return out;
  }
};

}  // namespace

DfsResult resistance_dfs_avx2(const LazyTree& tree, const Cursor& start, const DfsConfig& cfg) {
  return ResistanceDfs<Avx2Ops>(tree, cfg).run(start);
}

}  // namespace gwheat::detail
