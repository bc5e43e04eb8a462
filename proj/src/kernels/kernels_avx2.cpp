#include "txl/kernels.hpp"

// AVX2+FMA kernels, 4 doubles per vector. This translation unit is compiled
// with -mavx2 -mfma and must only be entered after a runtime CPU check.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace txl::kernels {
namespace {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const __m256d av = _mm256_set1_pd(arow[l]);
      const double* brow = b + static_cast<std::size_t>(l) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double as = arow[l];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot(const double* a, const double* b, std::size_t n) {
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
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
  const int n4 = n & ~3;
  for (int l = 0; l < k; ++l) {
    const double* arow = a + static_cast<std::size_t>(l) * m;
    const double* brow = b + static_cast<std::size_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(arow[i]);
      double* crow = c + static_cast<std::size_t>(i) * n;
      int j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double as = arow[i];
      for (; j < n; ++j) crow[j] += as * brow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

double sum(const double* a, std::size_t n) {
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return hsum(acc) + tail;
}

void relu(const double* x, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n4 = n & ~static_cast<std::size_t>(3);
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d gated = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), gated));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) dx[i] += dy[i];
  }
}

}  // namespace

const KernelTable* avx2_table_ptr() {
  static const KernelTable table{
      "avx2", gemm_nn, gemm_nt, gemm_tn, add, mul, axpy, scale, dot, sum, relu, relu_grad,
  };
  return &table;
}

}  // namespace txl::kernels

#endif  // x86
