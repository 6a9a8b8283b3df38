#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gp3/gradcheck.hpp"
#include "gp3/rng.hpp"
#include "gp3/tensor.hpp"

using namespace gp3;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, rng::Stream& rs, bool requires_grad = false,
                     double lo = -2.0, double hi = 2.0) {
    std::vector<double> d(ad::shape_size(shape));
    for (auto& v : d) v = rs.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(d), requires_grad);
}

// keeps elementwise inputs away from the abs kink and log/sqrt domains
Tensor random_positive(ad::Shape shape, rng::Stream& rs, bool rg = false) {
    std::vector<double> d(ad::shape_size(shape));
    for (auto& v : d) v = rs.uniform(0.2, 2.5);
    return Tensor::from(std::move(shape), std::move(d), rg);
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
    Tensor x = Tensor::from({3}, {0.0, 0.0, 0.0});
    Tensor y = ad::softmax(x);
    for (int i = 0; i < 3; ++i) CHECK(y.raw()[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax rows sum to one and lie in (0,1)") {
    rng::Stream rs(11);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor x = random_tensor({5, 7}, rs, false, -30.0, 30.0);
        Tensor y = ad::softmax(x);
        for (int r = 0; r < 5; ++r) {
            double s = 0.0;
            for (int j = 0; j < 7; ++j) {
                const double v = y.raw()[r * 7 + j];
                CHECK(v > 0.0);
                CHECK(v < 1.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("matmul by identity returns the operand") {
    rng::Stream rs(3);
    Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor x = random_tensor({3, 5}, rs);
    Tensor y = ad::matmul(eye, x);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.raw()[i] == x.raw()[i]);
}

TEST_CASE("layer_norm matches the hand-computed normalization") {
    Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0});
    Tensor y = ad::layer_norm(x, 0.0);
    const double v = 1.2247448713915890;  // 1/sqrt(2/3)
    CHECK(y.raw()[0] == doctest::Approx(-v).epsilon(1e-12));
    CHECK(y.raw()[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y.raw()[2] == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("backward of sum of squares") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor loss = ad::sum(ad::mul(x, x));
    ad::backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("constant loss leaves all gradients zero") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor c = Tensor::scalar(5.0);
    ad::backward(c);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar loss and repeated passes") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    Tensor y = ad::mul(x, x);
    CHECK_THROWS_AS(ad::backward(y), std::invalid_argument);
    Tensor loss = ad::sum(y);
    ad::backward(loss);
    CHECK_THROWS_AS(ad::backward(loss), std::runtime_error);
}

TEST_CASE("backward through a reused subexpression accumulates additively") {
    // loss = sum(u*u + u) with u shared, against the duplicated-subgraph oracle
    auto build = [](const Tensor& x, bool share) {
        Tensor u1 = ad::exp(x);
        Tensor u2 = share ? u1 : ad::exp(x);
        return ad::sum(ad::add(ad::mul(u1, u2), u1));
    };
    rng::Stream rs(7);
    Tensor x0 = random_tensor({4}, rs);
    Tensor xa = Tensor::from(x0.shape(), x0.data(), true);
    Tensor xb = Tensor::from(x0.shape(), x0.data(), true);
    ad::backward(build(xa, true));
    ad::backward(build(xb, false));
    for (size_t i = 0; i < x0.size(); ++i)
        CHECK(xa.grad()[i] == doctest::Approx(xb.grad()[i]).epsilon(1e-14));
}

TEST_CASE("matmul mean loss matches central differences") {
    rng::Stream rs(19);
    Tensor b0 = random_tensor({4, 3}, rs);
    auto f = [&](const Tensor& a) { return ad::mean(ad::matmul(a, b0)); };
    Tensor a0 = random_tensor({2, 4}, rs);
    CHECK(ad::finite_diff_gradcheck(f, a0, 1e-5) <= 1e-6);
}

TEST_CASE("gradcheck of sum is exact to 1e-9") {
    rng::Stream rs(23);
    Tensor x0 = random_tensor({6}, rs);
    auto f = [](const Tensor& x) { return ad::sum(x); };
    CHECK(ad::finite_diff_gradcheck(f, x0, 1e-5) <= 1e-9);
}

TEST_CASE("every primitive passes gradcheck at 10 random points") {
    const double eps = 1e-5, tol = 1e-5;
    rng::Stream rs(101);

    struct Case {
        const char* name;
        ad::ScalarFn fn;
        bool positive_domain;
    };
    Tensor fixed = random_tensor({4, 6}, rs);
    Tensor rowv = random_tensor({6}, rs);
    std::vector<Case> cases = {
        {"add", [&](const Tensor& x) { return ad::sum(ad::add(x, fixed)); }, false},
        {"sub", [&](const Tensor& x) { return ad::sum(ad::sub(fixed, x)); }, false},
        {"mul", [&](const Tensor& x) { return ad::sum(ad::mul(x, fixed)); }, false},
        {"div_num", [&](const Tensor& x) { return ad::sum(ad::div(x, fixed)); }, true},
        {"div_den", [&](const Tensor& x) { return ad::sum(ad::div(fixed, x)); }, true},
        {"neg", [](const Tensor& x) { return ad::sum(ad::neg(x)); }, false},
        {"exp", [](const Tensor& x) { return ad::sum(ad::exp(x)); }, false},
        {"log", [](const Tensor& x) { return ad::sum(ad::log(x)); }, true},
        {"sqrt", [](const Tensor& x) { return ad::sum(ad::sqrt(x)); }, true},
        {"abs", [](const Tensor& x) { return ad::sum(ad::abs(x)); }, true},
        {"tanh", [](const Tensor& x) { return ad::sum(ad::tanh(x)); }, false},
        {"sigmoid", [](const Tensor& x) { return ad::sum(ad::sigmoid(x)); }, false},
        {"gelu", [](const Tensor& x) { return ad::sum(ad::gelu(x)); }, false},
        {"softplus", [](const Tensor& x) { return ad::sum(ad::softplus(x)); }, false},
        {"scalar_ops", [](const Tensor& x) { return ad::sum(ad::add_scalar(ad::mul_scalar(x, 1.7), 0.3)); }, false},
        {"matmul_lhs", [&](const Tensor& x) { return ad::mean(ad::matmul(ad::reshape(x, {6, 4}), ad::reshape(fixed, {4, 6}))); }, false},
        {"matmul_rhs", [&](const Tensor& x) { return ad::mean(ad::matmul(ad::reshape(fixed, {6, 4}), ad::reshape(x, {4, 6}))); }, false},
        {"transpose", [](const Tensor& x) { return ad::mean(ad::mul(ad::transpose(ad::transpose(x)), x)); }, false},
        {"reshape", [](const Tensor& x) { return ad::sum(ad::mul(ad::reshape(x, {24}), ad::reshape(x, {24}))); }, false},
        {"concat_rows", [](const Tensor& x) {
             Tensor a = ad::slice_rows(x, 0, 2), b = ad::slice_rows(x, 2, 2);
             return ad::mean(ad::exp(ad::concat_rows({b, a})));
         }, false},
        {"concat_cols", [](const Tensor& x) {
             Tensor a = ad::slice_cols(x, 0, 2), b = ad::slice_cols(x, 2, 4);
             return ad::mean(ad::exp(ad::concat_cols({b, a})));
         }, false},
        {"softmax", [](const Tensor& x) { return ad::mean(ad::mul(ad::softmax(x), ad::softmax(x))); }, false},
        {"layer_norm", [](const Tensor& x) { return ad::mean(ad::exp(ad::layer_norm(x, 1e-6))); }, false},
        {"mean", [](const Tensor& x) { return ad::mean(ad::mul(x, x)); }, false},
        {"mul_rowvec", [&](const Tensor& x) { return ad::sum(ad::mul_rowvec(x, rowv)); }, false},
        {"add_rowvec", [&](const Tensor& x) { return ad::sum(ad::exp(ad::add_rowvec(x, rowv))); }, false},
        {"rowvec_as_vec", [&](const Tensor& x) {
             return ad::sum(ad::mul_rowvec(fixed, ad::reshape(ad::slice_rows(ad::reshape(x, {4, 6}), 0, 1), {6})));
         }, false},
        {"scale_by", [](const Tensor& x) {
             Tensor s = ad::mean(x);
             return ad::sum(ad::scale_by(ad::tanh(x), s));
         }, false},
        {"smooth3x3", [](const Tensor& x) { return ad::mean(ad::mul(ad::smooth3x3(ad::reshape(x, {4, 6})), ad::smooth3x3(ad::reshape(x, {4, 6})))); }, false},
        {"bilinear_upsample", [](const Tensor& x) { return ad::mean(ad::exp(ad::bilinear_upsample(ad::reshape(x, {4, 6}), 3))); }, false},
        {"extract_patches", [](const Tensor& x) { return ad::mean(ad::mul(ad::extract_patches(ad::reshape(x, {4, 6}), 2), ad::extract_patches(ad::reshape(x, {4, 6}), 2))); }, false},
        {"fold_patches", [](const Tensor& x) { return ad::mean(ad::exp(ad::fold_patches(ad::reshape(x, {6, 4}), 4, 6, 2))); }, false},
        {"huber", [](const Tensor& x) { return ad::huber_sum(x, 1.0); }, true},
        {"embed_mean", [](const Tensor& x) { return ad::sum(ad::embed_mean(x, {0, 2, 2})); }, false},
    };

    for (const auto& c : cases) {
        CAPTURE(c.name);
        double worst = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            Tensor x0 = c.positive_domain ? random_positive({4, 6}, rs) : random_tensor({4, 6}, rs);
            if (std::string(c.name) == "huber") {
                // keep residuals away from the |r| == delta boundary
                for (auto& v : x0.data())
                    if (std::abs(std::abs(v) - 1.0) < 1e-3) v += 0.01;
            }
            worst = std::max(worst, ad::finite_diff_gradcheck(c.fn, x0, eps));
        }
        CHECK(worst <= tol);
    }
}

TEST_CASE("huber matches hand values") {
    CHECK(ad::huber_sum(Tensor::from({1}, {0.0}), 1.0).item() == 0.0);
    CHECK(ad::huber_sum(Tensor::from({1}, {0.5}), 1.0).item() == doctest::Approx(0.125));
    CHECK(ad::huber_sum(Tensor::from({1}, {2.0}), 1.0).item() == doctest::Approx(1.5));
}

TEST_CASE("shape errors name the offending shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 2});
    CHECK_THROWS_WITH_AS(ad::add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
    Tensor c = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(ad::matmul(a, c), doctest::Contains("[2,3]"), std::invalid_argument);
}

TEST_CASE("log and sqrt reject out-of-domain input") {
    CHECK_THROWS_AS(ad::log(Tensor::from({2}, {1.0, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(ad::log(Tensor::from({1}, {-3.0})), std::invalid_argument);
    CHECK_THROWS_AS(ad::sqrt(Tensor::from({1}, {-1e-9})), std::invalid_argument);
    CHECK_NOTHROW(ad::sqrt(Tensor::from({1}, {0.0})));
}

TEST_CASE("canonicalize_camera flips only the quaternion block") {
    Tensor g = Tensor::from({8}, {-0.5, 0.1, -0.2, 0.3, 1.0, 2.0, 3.0, 0.7}, true);
    Tensor c = ad::canonicalize_camera(g);
    CHECK(c.raw()[0] == doctest::Approx(0.5));
    CHECK(c.raw()[1] == doctest::Approx(-0.1));
    CHECK(c.raw()[3] == doctest::Approx(-0.3));
    CHECK(c.raw()[4] == 1.0);
    CHECK(c.raw()[7] == 0.7);
    ad::backward(ad::sum(c));
    CHECK(g.grad()[0] == -1.0);
    CHECK(g.grad()[4] == 1.0);
}

TEST_CASE("embed_mean handles empty, single and multi-token lookups") {
    Tensor table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor e0 = ad::embed_mean(table, {});
    CHECK(e0.raw()[0] == 0.0);
    CHECK(e0.raw()[1] == 0.0);
    Tensor e1 = ad::embed_mean(table, {1});
    CHECK(e1.raw()[0] == 3.0);
    CHECK(e1.raw()[1] == 4.0);
    Tensor e2 = ad::embed_mean(table, {0, 2});
    CHECK(e2.raw()[0] == doctest::Approx(3.0));
    CHECK(e2.raw()[1] == doctest::Approx(4.0));
    CHECK_THROWS_AS(ad::embed_mean(table, {3}), std::invalid_argument);
}

TEST_CASE("attention composed from primitives keeps row-stochastic weights") {
    rng::Stream rs(55);
    Tensor q = random_tensor({5, 8}, rs);
    Tensor k = random_tensor({5, 8}, rs);
    Tensor scores = ad::mul_scalar(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(8.0));
    Tensor w = ad::softmax(scores);
    for (int r = 0; r < 5; ++r) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) s += w.raw()[r * 5 + j];
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("non-finite gradients are reported") {
    // sqrt'(x) at x=0 is infinite
    Tensor x = Tensor::from({1}, {0.0}, true);
    Tensor loss = ad::sum(ad::sqrt(x));
    CHECK_THROWS_AS(ad::backward(loss), std::runtime_error);
}
