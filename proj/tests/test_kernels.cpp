#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gp3/kernels.hpp"
#include "gp3/rng.hpp"

using namespace gp3;

namespace {

std::vector<double> random_vec(size_t n, uint64_t seed) {
    rng::Stream rs(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rs.uniform(-1.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("parallel matmul variants are bit-identical to the serial reference") {
    const int n = 37, k = 29, m = 41;
    auto a = random_vec(static_cast<size_t>(n) * k, 1);
    auto b = random_vec(static_cast<size_t>(k) * m, 2);
    auto bt = random_vec(static_cast<size_t>(m) * k, 3);
    auto at = random_vec(static_cast<size_t>(k) * n, 4);

    std::vector<double> c_ser(static_cast<size_t>(n) * m), c_par(c_ser.size());
    kernels::matmul_serial(a.data(), b.data(), c_ser.data(), n, k, m);
    kernels::matmul_parallel(a.data(), b.data(), c_par.data(), n, k, m);
    CHECK(c_ser == c_par);

    kernels::matmul_nt_serial(a.data(), bt.data(), c_ser.data(), n, k, m);
    kernels::matmul_nt_parallel(a.data(), bt.data(), c_par.data(), n, k, m);
    CHECK(c_ser == c_par);

    kernels::matmul_tn_serial(at.data(), b.data(), c_ser.data(), n, k, m, false);
    kernels::matmul_tn_parallel(at.data(), b.data(), c_par.data(), n, k, m, false);
    CHECK(c_ser == c_par);

    // accumulate mode
    auto base = random_vec(c_ser.size(), 5);
    c_ser = base;
    c_par = base;
    kernels::matmul_tn_serial(at.data(), b.data(), c_ser.data(), n, k, m, true);
    kernels::matmul_tn_parallel(at.data(), b.data(), c_par.data(), n, k, m, true);
    CHECK(c_ser == c_par);
}

TEST_CASE("matmul agrees with a naive triple loop") {
    const int n = 5, k = 7, m = 4;
    auto a = random_vec(static_cast<size_t>(n) * k, 10);
    auto b = random_vec(static_cast<size_t>(k) * m, 11);
    std::vector<double> c(static_cast<size_t>(n) * m);
    kernels::matmul(a.data(), b.data(), c.data(), n, k, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
            CHECK(c[i * m + j] == doctest::Approx(acc).epsilon(1e-13));
        }
}

TEST_CASE("dispatch honors the global parallel switch") {
    kernels::set_parallel(false);
    CHECK_FALSE(kernels::parallel_enabled());
    const int n = 64, k = 64, m = 64;
    auto a = random_vec(static_cast<size_t>(n) * k, 20);
    auto b = random_vec(static_cast<size_t>(k) * m, 21);
    std::vector<double> c_off(static_cast<size_t>(n) * m), c_on(c_off.size());
    kernels::matmul(a.data(), b.data(), c_off.data(), n, k, m);
    kernels::set_parallel(true);
    CHECK(kernels::parallel_enabled());
    kernels::matmul(a.data(), b.data(), c_on.data(), n, k, m);
    CHECK(c_off == c_on);
}
