#if defined(QGMM_HAVE_AVX2)

#include <immintrin.h>

#include "simd/smoothing_kernels.hpp"

// Compiled with -mavx2 -mfma for this translation unit only; callers reach it
// through the runtime dispatcher after a cpuid check.

namespace qgmm::kernels::detail {
namespace {

inline __m256d indicator_core4(__m256d u) {
  const __m256d t = _mm256_mul_pd(u, u);
  __m256d p = _mm256_fmadd_pd(t, _mm256_set1_pd(-3.0 / 7.0), _mm256_set1_pd(7.0 / 5.0));
  p = _mm256_fmadd_pd(t, p, _mm256_set1_pd(-5.0 / 3.0));
  p = _mm256_fmadd_pd(t, p, _mm256_set1_pd(1.0));
  const __m256d a = _mm256_mul_pd(u, _mm256_set1_pd(105.0 / 64.0));
  __m256d r = _mm256_fmadd_pd(a, p, _mm256_set1_pd(0.5));
  // saturate outside (-1, 1)
  const __m256d lo = _mm256_cmp_pd(u, _mm256_set1_pd(-1.0), _CMP_LE_OQ);
  const __m256d hi = _mm256_cmp_pd(u, _mm256_set1_pd(1.0), _CMP_GE_OQ);
  r = _mm256_blendv_pd(r, _mm256_setzero_pd(), lo);
  r = _mm256_blendv_pd(r, _mm256_set1_pd(1.0), hi);
  return r;
}

inline __m256d derivative_core4(__m256d u) {
  const __m256d t = _mm256_mul_pd(u, u);
  __m256d q = _mm256_fmadd_pd(t, _mm256_set1_pd(-3.0), _mm256_set1_pd(7.0));
  q = _mm256_fmadd_pd(t, q, _mm256_set1_pd(-5.0));
  q = _mm256_fmadd_pd(t, q, _mm256_set1_pd(1.0));
  __m256d r = _mm256_mul_pd(_mm256_set1_pd(105.0 / 64.0), q);
  // zero outside (-1, 1); abs via sign-bit mask
  const __m256d absu = _mm256_andnot_pd(_mm256_set1_pd(-0.0), u);
  const __m256d outside = _mm256_cmp_pd(absu, _mm256_set1_pd(1.0), _CMP_GE_OQ);
  r = _mm256_blendv_pd(r, _mm256_setzero_pd(), outside);
  return r;
}

}  // namespace

void indicator_batch_avx2(const double* in, double scale, double* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(s, _mm256_loadu_pd(in + i));
    _mm256_storeu_pd(out + i, indicator_core4(u));
  }
  for (; i < n; ++i) out[i] = indicator_scalar(scale * in[i]);
}

void derivative_batch_avx2(const double* in, double scale, double* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(s, _mm256_loadu_pd(in + i));
    _mm256_storeu_pd(out + i, derivative_core4(u));
  }
  for (; i < n; ++i) out[i] = derivative_scalar(scale * in[i]);
}

}  // namespace qgmm::kernels::detail

#endif  // QGMM_HAVE_AVX2
