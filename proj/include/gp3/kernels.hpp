#pragma once

// Dense float64 kernels, each in a serial reference version and an
// OpenMP version. The parallel versions split work per output element
// with the inner accumulation order unchanged, so serial and parallel
// results are bit-identical (verified in tests/test_kernels.cpp).

namespace gp3::kernels {

// Global switch consulted by the dispatching entry points below and by the
// OpenMP loops in the renderer, chamfer metrics and the batch trainer.
void set_parallel(bool enabled);
bool parallel_enabled();

// True when called from inside an OpenMP parallel region; used to avoid
// nested parallelism (batch-level parallel loops call serial kernels).
bool in_parallel_region();

// C(n x m) = A(n x k) * B(k x m), row-major, C overwritten.
void matmul_serial(const double* A, const double* B, double* C, int n, int k, int m);
void matmul_parallel(const double* A, const double* B, double* C, int n, int k, int m);
void matmul(const double* A, const double* B, double* C, int n, int k, int m);

// C(n x m) = A(n x k) * B(m x k)^T
void matmul_nt_serial(const double* A, const double* B, double* C, int n, int k, int m);
void matmul_nt_parallel(const double* A, const double* B, double* C, int n, int k, int m);
void matmul_nt(const double* A, const double* B, double* C, int n, int k, int m);

// C(n x m) = A(k x n)^T * B(k x m); accumulate=true adds into C.
void matmul_tn_serial(const double* A, const double* B, double* C, int n, int k, int m,
                      bool accumulate);
void matmul_tn_parallel(const double* A, const double* B, double* C, int n, int k, int m,
                        bool accumulate);
void matmul_tn(const double* A, const double* B, double* C, int n, int k, int m,
               bool accumulate = false);

}  // namespace gp3::kernels
