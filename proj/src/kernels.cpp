#include "gp3/kernels.hpp"

#include <atomic>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gp3::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

bool in_parallel_region() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

// ikj order: the k-accumulation for each C[i,j] runs in increasing k in both
// versions, which is what makes serial and parallel outputs bit-identical.
void matmul_serial(const double* A, const double* B, double* C, int n, int k, int m) {
    std::memset(C, 0, sizeof(double) * static_cast<size_t>(n) * m);
    for (int i = 0; i < n; ++i) {
        double* ci = C + static_cast<size_t>(i) * m;
        const double* ai = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double a = ai[p];
            const double* bp = B + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul_parallel(const double* A, const double* B, double* C, int n, int k, int m) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ci = C + static_cast<size_t>(i) * m;
        const double* ai = A + static_cast<size_t>(i) * k;
        for (int j = 0; j < m; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double a = ai[p];
            const double* bp = B + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul(const double* A, const double* B, double* C, int n, int k, int m) {
    const long work = static_cast<long>(n) * k * m;
    if (parallel_enabled() && !in_parallel_region() && n > 1 && work > 32768) {
        matmul_parallel(A, B, C, n, k, m);
    } else {
        matmul_serial(A, B, C, n, k, m);
    }
}

void matmul_nt_serial(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = B + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_nt_parallel(const double* A, const double* B, double* C, int n, int k, int m) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* ai = A + static_cast<size_t>(i) * k;
        double* ci = C + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = B + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_nt(const double* A, const double* B, double* C, int n, int k, int m) {
    const long work = static_cast<long>(n) * k * m;
    if (parallel_enabled() && !in_parallel_region() && n > 1 && work > 32768) {
        matmul_nt_parallel(A, B, C, n, k, m);
    } else {
        matmul_nt_serial(A, B, C, n, k, m);
    }
}

void matmul_tn_serial(const double* A, const double* B, double* C, int n, int k, int m,
                      bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(n) * m);
    for (int p = 0; p < k; ++p) {
        const double* ap = A + static_cast<size_t>(p) * n;
        const double* bp = B + static_cast<size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            const double a = ap[i];
            double* ci = C + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul_tn_parallel(const double* A, const double* B, double* C, int n, int k, int m,
                        bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* ci = C + static_cast<size_t>(i) * m;
        if (!accumulate)
            for (int j = 0; j < m; ++j) ci[j] = 0.0;
        for (int p = 0; p < k; ++p) {
            const double a = A[static_cast<size_t>(p) * n + i];
            const double* bp = B + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += a * bp[j];
        }
    }
}

void matmul_tn(const double* A, const double* B, double* C, int n, int k, int m,
               bool accumulate) {
    const long work = static_cast<long>(n) * k * m;
    if (parallel_enabled() && !in_parallel_region() && n > 1 && work > 32768) {
        matmul_tn_parallel(A, B, C, n, k, m, accumulate);
    } else {
        matmul_tn_serial(A, B, C, n, k, m, accumulate);
    }
}

}  // namespace gp3::kernels
