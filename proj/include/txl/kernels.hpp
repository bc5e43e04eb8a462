#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace txl::kernels {

// Dense double-precision primitives behind the tensor ops. All matrices are
// row-major. The gemm_* variants accumulate into c, so backward passes can
// reuse them for gradient accumulation; callers zero c for a plain product.
//
// One table per backend (scalar reference, AVX2, NEON). The active table is
// picked once at startup from CPU features, or forced via the TXL_KERNELS
// environment variable / select().
struct KernelTable {
  const char* name;

  // c[m x n] += a[m x k] * b[k x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n);
  // c[m x n] += a[m x k] * b[n x k]^T   (b stored row-major as n x k)
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k, int n);
  // c[m x n] += a[k x m]^T * b[k x n]   (a stored row-major as k x m)
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = alpha * x
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  // dx += dy where x > 0
  void (*relu_grad)(const double* x, const double* dy, double* dx, std::size_t n);
};

const KernelTable& scalar_table();

// Backends compiled into this build and usable on this CPU.
std::vector<std::string> available();

// Table by name ("scalar", "avx2", "neon"); nullptr if not available.
const KernelTable* find(const std::string& name);

// The selected table. First call resolves TXL_KERNELS or picks the widest
// available backend; the choice then stays fixed so runs are reproducible.
const KernelTable& active();

// Force a backend (tests, CLI flag). Returns false if unavailable.
bool select(const std::string& name);

}  // namespace txl::kernels
