#pragma once

#include <cmath>
#include <cstddef>

// Internal kernel implementations behind qgmm::kernels dispatch.
// The scalar bodies are the reference; the AVX2 bodies mirror the exact
// fma chain so scalar/AVX2 outputs compare bitwise equal in tests.

namespace qgmm::kernels::detail {

// 0.5 + (105/64) u (1 - (5/3)u^2 + (7/5)u^4 - (3/7)u^6), Horner in u^2.
inline double indicator_core(double u) {
  const double t = u * u;
  double p = std::fma(t, -3.0 / 7.0, 7.0 / 5.0);
  p = std::fma(t, p, -5.0 / 3.0);
  p = std::fma(t, p, 1.0);
  return std::fma(u * (105.0 / 64.0), p, 0.5);
}

// (105/64)(1 - 5u^2 + 7u^4 - 3u^6), Horner in u^2.
inline double derivative_core(double u) {
  const double t = u * u;
  double q = std::fma(t, -3.0, 7.0);
  q = std::fma(t, q, -5.0);
  q = std::fma(t, q, 1.0);
  return (105.0 / 64.0) * q;
}

inline double indicator_scalar(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return indicator_core(u);
}

inline double derivative_scalar(double u) {
  if (u <= -1.0 || u >= 1.0) return 0.0;
  return derivative_core(u);
}

void indicator_batch_scalar(const double* in, double scale, double* out, std::size_t n);
void derivative_batch_scalar(const double* in, double scale, double* out, std::size_t n);

#if defined(QGMM_HAVE_AVX2)
void indicator_batch_avx2(const double* in, double scale, double* out, std::size_t n);
void derivative_batch_avx2(const double* in, double scale, double* out, std::size_t n);
#endif

}  // namespace qgmm::kernels::detail
