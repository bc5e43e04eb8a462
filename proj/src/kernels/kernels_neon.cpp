#include "txl/kernels.hpp"

// NEON kernels for aarch64, 2 doubles per vector.

#if defined(__ARM_NEON) && defined(__aarch64__)

#include <arm_neon.h>

namespace txl::kernels {
namespace {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  const int n2 = n & ~1;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const float64x2_t av = vdupq_n_f64(arow[l]);
      const double* brow = b + static_cast<std::size_t>(l) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cv = vld1q_f64(crow + j);
        cv = vfmaq_f64(cv, av, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[l] * brow[j];
    }
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i < n2; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return vaddvq_f64(acc) + tail;
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      crow[j] += dot(arow, b + static_cast<std::size_t>(j) * k, static_cast<std::size_t>(k));
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  const int n2 = n & ~1;
  for (int l = 0; l < k; ++l) {
    const double* arow = a + static_cast<std::size_t>(l) * m;
    const double* brow = b + static_cast<std::size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const float64x2_t av = vdupq_n_f64(arow[i]);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n2; j += 2) {
        float64x2_t cv = vld1q_f64(crow + j);
        cv = vfmaq_f64(cv, av, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(alpha);
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vmulq_f64(av, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double sum(const double* a, std::size_t n) {
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i < n2; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return vaddvq_f64(acc) + tail;
}

void relu(const double* x, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const std::size_t n2 = n & ~static_cast<std::size_t>(1);
  std::size_t i = 0;
  for (; i < n2; i += 2) vst1q_f64(out + i, vmaxq_f64(zero, vld1q_f64(x + i)));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

}  // namespace

const KernelTable* neon_table_ptr() {
  static const KernelTable table{
      "neon", gemm_nn, gemm_nt, gemm_tn, add, mul, axpy, scale, dot, sum, relu, relu_grad,
  };
  return &table;
}

}  // namespace txl::kernels

#endif  // aarch64 NEON
