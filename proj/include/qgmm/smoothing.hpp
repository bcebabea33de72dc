#pragma once

#include <cstddef>
#include <vector>

namespace qgmm {

// Order of the smoothing kernel: I~' has vanishing moments 1..3, nonzero 4th.
inline constexpr int kKernelOrder = 4;

// Smoothed indicator. 0 for u <= -1, 1 for u >= 1, and
// 0.5 + (105/64)(u - (5/3)u^3 + (7/5)u^5 - (3/7)u^7) in between.
// Throws std::domain_error on non-finite input.
double smooth_indicator(double u);

// d/du of the above: (105/64)(1 - 5u^2 + 7u^4 - 3u^6) on [-1,1], else 0.
double smooth_indicator_derivative(double u);

// Integral over [-1,1] of u^k I~'(u) by Gauss-Legendre quadrature.
// k = 0 gives 1, k = 1..3 give 0, k = 4 gives -1/33.
double kernel_moment(int k, int quadrature_nodes = 128);

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

namespace kernels {

// Batch transforms, out[i] = f(scale * in[i]); moment evaluation passes
// scale = -1/h. Runtime-dispatched between the scalar reference and AVX2;
// both evaluate the identical fma chain, so results are bitwise equal.
void smooth_indicator_batch(const double* in, double scale, double* out, std::size_t n);
void smooth_indicator_derivative_batch(const double* in, double scale, double* out, std::size_t n);

// "avx2" or "scalar"; also settable via env QGMM_SIMD={scalar,avx2}.
const char* active_implementation();

// Test hook; returns false if the named implementation is unavailable.
bool force_implementation(const char* name);

}  // namespace kernels
}  // namespace qgmm
