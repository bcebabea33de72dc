#include "qgmm/smoothing.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "simd/smoothing_kernels.hpp"

namespace qgmm {

double smooth_indicator(double u) {
  if (!std::isfinite(u)) throw std::domain_error("smooth_indicator: non-finite input");
  return kernels::detail::indicator_scalar(u);
}

double smooth_indicator_derivative(double u) {
  if (!std::isfinite(u))
    throw std::domain_error("smooth_indicator_derivative: non-finite input");
  return kernels::detail::derivative_scalar(u);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton iteration from the Chebyshev initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

double kernel_moment(int k, int quadrature_nodes) {
  if (k < 0) throw std::invalid_argument("kernel_moment: k must be >= 0");
  if (quadrature_nodes < 64)
    throw std::invalid_argument("kernel_moment: need at least 64 quadrature nodes");
  std::vector<double> x, w;
  gauss_legendre(quadrature_nodes, x, w);
  double acc = 0.0;
  for (int i = 0; i < quadrature_nodes; ++i)
    acc += w[i] * std::pow(x[i], k) * kernels::detail::derivative_scalar(x[i]);
  return acc;
}

namespace kernels {

namespace {

using batch_fn = void (*)(const double*, double, double*, std::size_t);

struct Table {
  batch_fn indicator;
  batch_fn derivative;
  const char* name;
};

constexpr Table kScalar{detail::indicator_batch_scalar,
                        detail::derivative_batch_scalar, "scalar"};

#if defined(QGMM_HAVE_AVX2)
constexpr Table kAvx2{detail::indicator_batch_avx2, detail::derivative_batch_avx2,
                      "avx2"};
#endif

bool avx2_available() {
#if defined(QGMM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* select_table() {
  const char* env = std::getenv("QGMM_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return &kScalar;
#if defined(QGMM_HAVE_AVX2)
  if (avx2_available()) {
    if (env == nullptr || std::strcmp(env, "avx2") == 0) return &kAvx2;
  }
#endif
  return &kScalar;
}

std::atomic<const Table*> g_active{nullptr};

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = select_table();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

void smooth_indicator_batch(const double* in, double scale, double* out, std::size_t n) {
  active().indicator(in, scale, out, n);
}

void smooth_indicator_derivative_batch(const double* in, double scale, double* out,
                                       std::size_t n) {
  active().derivative(in, scale, out, n);
}

const char* active_implementation() { return active().name; }

bool force_implementation(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_active.store(&kScalar, std::memory_order_release);
    return true;
  }
#if defined(QGMM_HAVE_AVX2)
  if (std::strcmp(name, "avx2") == 0 && avx2_available()) {
    g_active.store(&kAvx2, std::memory_order_release);
    return true;
  }
#endif
  return false;
}

}  // namespace kernels
}  // namespace qgmm
