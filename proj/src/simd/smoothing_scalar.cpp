#include "simd/smoothing_kernels.hpp"

namespace qgmm::kernels::detail {

void indicator_batch_scalar(const double* in, double scale, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = indicator_scalar(scale * in[i]);
}

void derivative_batch_scalar(const double* in, double scale, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = derivative_scalar(scale * in[i]);
}

}  // namespace qgmm::kernels::detail
