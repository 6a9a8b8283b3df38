// Times the OpenMP kernels against their serial reference implementations.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "gp3/kernels.hpp"
#include "gp3/rng.hpp"

using namespace gp3;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
    rng::Stream rs(42);

    {
        const int n = 256, k = 256, m = 256;
        std::vector<double> a(static_cast<size_t>(n) * k), b(static_cast<size_t>(k) * m),
            c(static_cast<size_t>(n) * m);
        for (auto& v : a) v = rs.uniform(-1, 1);
        for (auto& v : b) v = rs.uniform(-1, 1);
        double ser = time_ms([&] { kernels::matmul_serial(a.data(), b.data(), c.data(), n, k, m); }, 5);
        double par = time_ms([&] { kernels::matmul_parallel(a.data(), b.data(), c.data(), n, k, m); }, 5);
        report("matmul 256^3", ser, par);
    }
    {
        const int n = 68, k = 64, m = 64;
        std::vector<double> a(static_cast<size_t>(n) * k), b(static_cast<size_t>(k) * m),
            c(static_cast<size_t>(n) * m);
        for (auto& v : a) v = rs.uniform(-1, 1);
        for (auto& v : b) v = rs.uniform(-1, 1);
        double ser = time_ms([&] { kernels::matmul_serial(a.data(), b.data(), c.data(), n, k, m); }, 200);
        double par = time_ms([&] { kernels::matmul_parallel(a.data(), b.data(), c.data(), n, k, m); }, 200);
        report("matmul 68x64x64 (tokens)", ser, par);
    }
    return 0;
}
